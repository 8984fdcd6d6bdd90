/**
 * Bound generator sessions.
 *
 * A session owns one engine run: it validates the caller's config text,
 * re-points the run at a private scratch directory, invokes the `view-forge`
 * CLI once, then streams the emitted pairs back by decoding the manifest and
 * PNGs in manifest order. All pixel and metadata content comes from the
 * engine's own outputs; nothing is recomputed on this side, so a session's
 * stream is byte-for-byte the engine's.
 */

import { execFile } from "node:child_process";
import { mkdtemp, readFile, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { decodePng, type DecodedImage } from "./png.js";
import { parseManifest, type Box, type ManifestRow } from "./manifest.js";

const execFileAsync = promisify(execFile);

/** The engine rejected the config; the message is its validator output verbatim. */
export class ConfigError extends Error {}

/** The engine could not be run, or failed reading/writing its inputs and outputs. */
export class EngineIoError extends Error {}

export interface SessionOptions {
  /** Path to the engine CLI. Defaults to $VIEW_FORGE_CLI, then plain `view-forge` on PATH. */
  cliPath?: string;
  /** Leave the session's scratch directory in place after close(), for debugging. */
  keepOutputs?: boolean;
}

/** One synthesized pair, exactly as the engine wrote it. */
export interface ViewPair {
  query: DecodedImage;
  key: DecodedImage;
  queryBox: Box;
  keyBox: Box;
  /** The pair's full manifest row (seeds, IoU, strategy tags, warnings). */
  meta: ManifestRow;
}

interface CliRunResult {
  stdout: string;
  stderr: string;
}

async function runCli(cli: string, args: string[]): Promise<CliRunResult> {
  try {
    return await execFileAsync(cli, args, { maxBuffer: 64 * 1024 * 1024 });
  } catch (err) {
    const e = err as { code?: number | string; stderr?: string; message?: string };
    if (e.code === "ENOENT") {
      throw new EngineIoError(`cannot run ${cli}: executable not found`);
    }
    const detail = (e.stderr ?? e.message ?? "").trim();
    if (e.code === 1) throw new ConfigError(detail);
    throw new EngineIoError(detail || `engine exited with status ${String(e.code)}`);
  }
}

/**
 * Validate the config, run the engine once, and return a generator over the
 * run's pairs.
 *
 * `masterSeed` overrides the config's seed, exactly like `--seed` on the
 * command line. Invalid configs raise {@link ConfigError} carrying the same
 * message `view-forge validate` prints. A session is single-consumer: share
 * the emitted pairs, not the session object.
 */
export async function openSession(
  configText: string,
  masterSeed: number | bigint,
  opts: SessionOptions = {},
): Promise<ViewPairSession> {
  const seed = BigInt(masterSeed);
  if (seed < 0n || seed >= 1n << 64n) {
    throw new ConfigError(`master seed must fit in 64 unsigned bits, got ${seed}`);
  }
  const cli = opts.cliPath ?? process.env.VIEW_FORGE_CLI ?? "view-forge";

  const root = await mkdtemp(join(tmpdir(), "viewforge-"));
  try {
    // Validate the caller's text untouched so error messages (and their line
    // numbers) match `view-forge validate` on the same document.
    const cfgPath = join(root, "config.yaml");
    await writeFile(cfgPath, configText, "utf8");
    await runCli(cli, ["validate", "--config", cfgPath]);

    // Steer outputs into the scratch dir. output_dir is a required key on its
    // own line in every document that survives validation, so a line-level
    // replace is safe and keeps every other line where the validator saw it.
    const outDir = join(root, "out");
    const redirected = configText.replace(/^output_dir[ \t]*:.*$/m, `output_dir: ${outDir}`);
    const runPath = join(root, "run.yaml");
    await writeFile(runPath, redirected, "utf8");
    await runCli(cli, ["generate", "--config", runPath, "--seed", seed.toString()]);

    const manifestText = await readFile(join(outDir, "manifest.ndjson"), "utf8");
    return new ViewPairSession(root, outDir, parseManifest(manifestText), opts.keepOutputs ?? false);
  } catch (err) {
    if (!opts.keepOutputs) await rm(root, { recursive: true, force: true });
    throw err;
  }
}

export class ViewPairSession {
  /** Manifest rows for the whole run, in emission order. */
  readonly rows: readonly ManifestRow[];
  /** Directory holding the run's PNGs and manifest. */
  readonly outputDir: string;

  #root: string;
  #keep: boolean;
  #cursor = 0;
  #closed = false;

  constructor(root: string, outputDir: string, rows: ManifestRow[], keep: boolean) {
    this.#root = root;
    this.outputDir = outputDir;
    this.rows = rows;
    this.#keep = keep;
  }

  /** Pairs remaining ahead of the cursor. */
  get remaining(): number {
    return this.rows.length - this.#cursor;
  }

  /**
   * Decode and return the next pair, or null once the corpus is exhausted.
   *
   * The returned pixel buffers are the decoder's own; they are handed over
   * without copying and never reused by the session.
   */
  async nextPair(): Promise<ViewPair | null> {
    if (this.#closed) throw new EngineIoError("session is closed");
    if (this.#cursor >= this.rows.length) return null;
    const row = this.rows[this.#cursor++];
    const [queryBytes, keyBytes] = await Promise.all([
      readFile(join(this.outputDir, row.queryPath)),
      readFile(join(this.outputDir, row.keyPath)),
    ]);
    return {
      query: decodePng(queryBytes),
      key: decodePng(keyBytes),
      queryBox: row.queryBox,
      keyBox: row.keyBox,
      meta: row,
    };
  }

  async *[Symbol.asyncIterator](): AsyncGenerator<ViewPair, void, void> {
    for (;;) {
      const pair = await this.nextPair();
      if (pair === null) return;
      yield pair;
    }
  }

  /** Remove the session's scratch directory (unless keepOutputs was set). */
  async close(): Promise<void> {
    if (this.#closed) return;
    this.#closed = true;
    if (!this.#keep) {
      await rm(this.#root, { recursive: true, force: true });
    }
  }
}
