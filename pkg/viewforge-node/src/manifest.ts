/** Typed view of the generator's NDJSON manifest. */

/** Pixel rectangle, half-open: x in [x0, x1), y in [y0, y1). */
export interface Box {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface ManifestRow {
  itemIndex: number;
  sourcePath: string;
  sourceWidth: number;
  sourceHeight: number;
  /** Per-item seed; a full 64-bit value, hence bigint. */
  itemSeed: bigint;
  /** PNG filenames relative to the run's output directory. */
  queryPath: string;
  keyPath: string;
  queryBox: Box;
  keyBox: Box;
  querySrcBox: Box;
  keySrcBox: Box;
  iouAchieved: number;
  constraintSatisfied: boolean;
  strategyUsed: string;
  querySalientFrac: number | null;
  keySalientFrac: number | null;
  warnings: string[];
}

export class ManifestError extends Error {}

function box(v: unknown, field: string): Box {
  if (!Array.isArray(v) || v.length !== 4 || v.some((n) => typeof n !== "number")) {
    throw new ManifestError(`manifest field ${field} is not a 4-number box`);
  }
  return { x0: v[0], y0: v[1], x1: v[2], y1: v[3] };
}

/**
 * Parse one manifest line.
 *
 * item_seed would silently lose precision through JSON.parse (it can exceed
 * 2^53), so it is quoted in the raw text first and re-read as a bigint.
 */
export function parseManifestLine(line: string): ManifestRow {
  const guarded = line.replace(/"item_seed":\s*(\d+)/, '"item_seed":"$1"');
  let obj: Record<string, unknown>;
  try {
    obj = JSON.parse(guarded);
  } catch (err) {
    throw new ManifestError(`bad manifest line: ${(err as Error).message}`);
  }
  return {
    itemIndex: obj.item_index as number,
    sourcePath: obj.source_path as string,
    sourceWidth: obj.source_width as number,
    sourceHeight: obj.source_height as number,
    itemSeed: BigInt(obj.item_seed as string),
    queryPath: obj.query_path as string,
    keyPath: obj.key_path as string,
    queryBox: box(obj.query_box, "query_box"),
    keyBox: box(obj.key_box, "key_box"),
    querySrcBox: box(obj.query_src_box, "query_src_box"),
    keySrcBox: box(obj.key_src_box, "key_src_box"),
    iouAchieved: obj.iou_achieved as number,
    constraintSatisfied: obj.constraint_satisfied as boolean,
    strategyUsed: obj.strategy_used as string,
    querySalientFrac: (obj.query_salient_frac ?? null) as number | null,
    keySalientFrac: (obj.key_salient_frac ?? null) as number | null,
    warnings: (obj.warnings ?? []) as string[],
  };
}

/** Parse a whole manifest file body; blank trailing lines are tolerated. */
export function parseManifest(text: string): ManifestRow[] {
  return text
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map(parseManifestLine);
}
