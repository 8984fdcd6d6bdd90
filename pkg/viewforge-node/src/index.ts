export { decodePng, PngFormatError, type DecodedImage } from "./png.js";
export {
  parseManifest,
  parseManifestLine,
  ManifestError,
  type Box,
  type ManifestRow,
} from "./manifest.js";
export {
  openSession,
  ViewPairSession,
  ConfigError,
  EngineIoError,
  type SessionOptions,
  type ViewPair,
} from "./session.js";
