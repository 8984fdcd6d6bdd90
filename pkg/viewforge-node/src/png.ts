/**
 * Minimal PNG decoder for the generator's outputs.
 *
 * Handles exactly what the engine emits: 8-bit depth, greyscale / RGB /
 * RGBA, non-interlaced, filters 0-4. Anything else is rejected loudly
 * rather than decoded approximately.
 */

import { inflateSync, crc32 } from "node:zlib";

/** Decoded raster in row-major H×W×C layout, one byte per sample. */
export interface DecodedImage {
  width: number;
  height: number;
  /** Samples per pixel: 1 (grey), 2 (grey+alpha), 3 (RGB) or 4 (RGBA). */
  channels: number;
  /**
   * Pixel bytes, length `height * width * channels`. This is the decoder's
   * own unfilter buffer handed off directly; no copy is made after
   * reconstruction, so treat it as owned by the caller from here on.
   */
  data: Uint8Array;
}

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

const CHANNELS_BY_COLOR_TYPE: Record<number, number> = {
  0: 1, // greyscale
  2: 3, // truecolour
  4: 2, // greyscale + alpha
  6: 4, // truecolour + alpha
};

export class PngFormatError extends Error {}

function fail(msg: string): never {
  throw new PngFormatError(msg);
}

/** Decode a complete PNG byte stream. Throws PngFormatError on anything malformed or unsupported. */
export function decodePng(bytes: Uint8Array): DecodedImage {
  const buf = Buffer.isBuffer(bytes) ? bytes : Buffer.from(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (buf.length < SIGNATURE.length || !buf.subarray(0, 8).equals(SIGNATURE)) {
    fail("not a PNG: bad signature");
  }

  let width = 0;
  let height = 0;
  let channels = 0;
  let sawHeader = false;
  let sawEnd = false;
  const idatParts: Buffer[] = [];

  let pos = 8;
  while (pos < buf.length) {
    if (pos + 8 > buf.length) fail("truncated chunk header");
    const length = buf.readUInt32BE(pos);
    const type = buf.toString("latin1", pos + 4, pos + 8);
    const dataStart = pos + 8;
    const dataEnd = dataStart + length;
    if (dataEnd + 4 > buf.length) fail(`truncated ${type} chunk`);

    const stored = buf.readUInt32BE(dataEnd);
    const actual = crc32(buf.subarray(pos + 4, dataEnd)) >>> 0;
    if (stored !== actual) fail(`crc mismatch in ${type} chunk`);

    const data = buf.subarray(dataStart, dataEnd);
    if (!sawHeader && type !== "IHDR") fail(`expected IHDR first, got ${type}`);

    if (type === "IHDR") {
      if (sawHeader) fail("duplicate IHDR");
      if (length !== 13) fail("IHDR must be 13 bytes");
      width = data.readUInt32BE(0);
      height = data.readUInt32BE(4);
      const bitDepth = data[8];
      const colorType = data[9];
      const compression = data[10];
      const filterMethod = data[11];
      const interlace = data[12];
      if (width === 0 || height === 0) fail("zero image dimension");
      if (bitDepth !== 8) fail(`unsupported bit depth ${bitDepth}`);
      const ch = CHANNELS_BY_COLOR_TYPE[colorType];
      if (ch === undefined) fail(`unsupported colour type ${colorType}`);
      if (compression !== 0 || filterMethod !== 0) fail("nonstandard compression/filter method");
      if (interlace !== 0) fail("interlaced PNGs are not supported");
      channels = ch;
      sawHeader = true;
    } else if (type === "IDAT") {
      idatParts.push(data);
    } else if (type === "IEND") {
      sawEnd = true;
      break;
    }
    // ancillary chunks (tEXt, pHYs, ...) are skipped

    pos = dataEnd + 4;
  }

  if (!sawHeader) fail("missing IHDR");
  if (!sawEnd) fail("missing IEND");
  if (idatParts.length === 0) fail("missing IDAT");

  let raw: Buffer;
  try {
    raw = inflateSync(Buffer.concat(idatParts));
  } catch (err) {
    fail(`bad IDAT zlib stream: ${(err as Error).message}`);
  }

  const stride = width * channels;
  if (raw.length !== height * (stride + 1)) {
    fail(`decompressed size ${raw.length}, expected ${height * (stride + 1)}`);
  }

  return { width, height, channels, data: unfilter(raw, stride, height, channels) };
}

/** Reverse per-scanline filtering (types 0-4) into a packed pixel buffer. */
function unfilter(raw: Buffer, stride: number, height: number, bpp: number): Uint8Array {
  const out = Buffer.allocUnsafe(stride * height);
  let src = 0;
  for (let y = 0; y < height; y++) {
    const filter = raw[src++];
    const row = y * stride;
    const prev = row - stride;
    switch (filter) {
      case 0:
        raw.copy(out, row, src, src + stride);
        break;
      case 1: // Sub
        for (let x = 0; x < stride; x++) {
          const left = x >= bpp ? out[row + x - bpp] : 0;
          out[row + x] = (raw[src + x] + left) & 0xff;
        }
        break;
      case 2: // Up
        for (let x = 0; x < stride; x++) {
          const up = y > 0 ? out[prev + x] : 0;
          out[row + x] = (raw[src + x] + up) & 0xff;
        }
        break;
      case 3: // Average
        for (let x = 0; x < stride; x++) {
          const left = x >= bpp ? out[row + x - bpp] : 0;
          const up = y > 0 ? out[prev + x] : 0;
          out[row + x] = (raw[src + x] + ((left + up) >> 1)) & 0xff;
        }
        break;
      case 4: // Paeth
        for (let x = 0; x < stride; x++) {
          const left = x >= bpp ? out[row + x - bpp] : 0;
          const up = y > 0 ? out[prev + x] : 0;
          const upLeft = y > 0 && x >= bpp ? out[prev + x - bpp] : 0;
          out[row + x] = (raw[src + x] + paeth(left, up, upLeft)) & 0xff;
        }
        break;
      default:
        fail(`unknown filter type ${filter} on row ${y}`);
    }
    src += stride;
  }
  return out;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}
