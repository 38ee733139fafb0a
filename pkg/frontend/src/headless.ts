/** Headless entry point for CI against the primary stack.
 *
 *   node dist/src/headless.js emit --bundle B --out DIR --zeros 50 [--manifest M]
 *   node dist/src/headless.js submit --bundle B --guard URL --count N [--manifest M] [--interval MS]
 *   node dist/src/headless.js benchmark --bundle B [--widths 512,1024,2044]
 *
 * `emit` writes sealed chunks (and their request bodies) to files for a
 * cross-implementation check; `submit` drives a live guard; `benchmark`
 * prints timing records as JSON lines.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { benchmarkEncrypt } from "./benchmark.js";
import { base64Encode } from "./bigmath.js";
import { parseBundle } from "./bundle.js";
import { createState, runLoop } from "./client.js";
import { encZero, serializeChunk } from "./djclient.js";
import { sealChunk } from "./envelope.js";

function arg(name: string, fallback?: string): string {
  const idx = process.argv.indexOf(`--${name}`);
  if (idx >= 0 && idx + 1 < process.argv.length) return process.argv[idx + 1];
  if (fallback !== undefined) return fallback;
  throw new Error(`missing --${name}`);
}

async function emit(): Promise<void> {
  const bundle = parseBundle(readFileSync(arg("bundle")));
  const outDir = arg("out");
  const zeros = Number(arg("zeros", "0"));
  mkdirSync(outDir, { recursive: true });
  let index = 0;
  const write = (sealed: Uint8Array, kind: string) => {
    writeFileSync(join(outDir, `chunk_${String(index).padStart(3, "0")}_${kind}.bin`), sealed);
    writeFileSync(
      join(outDir, `chunk_${String(index).padStart(3, "0")}_${kind}.b64`),
      base64Encode(sealed),
    );
    index += 1;
  };
  for (let j = 0; j < zeros; j++) {
    write(await sealChunk(bundle.envPublic, serializeChunk(bundle, encZero(bundle))), "white");
  }
  const manifestPath = process.argv.includes("--manifest") ? arg("manifest") : null;
  if (manifestPath) {
    const state = createState(readFileSync(arg("bundle")), "http://unused", readFileSync(manifestPath));
    while (!state.manifest!.exhausted()) {
      write(state.manifest!.next()!, "gray");
    }
  }
  console.log(JSON.stringify({ written: index, sealedLen: bundle.sealedLen }));
}

async function submit(): Promise<void> {
  const manifestPath = process.argv.includes("--manifest") ? arg("manifest") : undefined;
  const state = createState(
    readFileSync(arg("bundle")),
    arg("guard"),
    manifestPath ? readFileSync(manifestPath) : undefined,
    Number(arg("interval", "0")),
  );
  await runLoop(state, Number(arg("count", "1")));
  console.log(JSON.stringify({ submitted: state.submitted, drained: state.drained }));
}

async function benchmark(): Promise<void> {
  const bundle = parseBundle(readFileSync(arg("bundle")));
  const widths = arg("widths", "512,1024,2044").split(",").map(Number);
  for (const width of widths) {
    console.log(JSON.stringify(await benchmarkEncrypt(bundle, width)));
  }
}

const command = process.argv[2];
const commands: Record<string, () => Promise<void>> = { emit, submit, benchmark };
if (!commands[command]) {
  console.error("usage: headless.js emit|submit|benchmark [options]");
  process.exit(1);
}
commands[command]().catch((err) => {
  console.error(String(err));
  process.exit(1);
});
