/** The submission client: every tick it posts one sealed chunk to a guard.
 * With no manifest the chunk is a fresh zero encryption; with one, queued
 * chunks are drained in order and the client falls back to zeros when the
 * queue is spent.  Both modes produce byte-identical request shapes, and
 * network failures are swallowed: a submission's fate must be unknowable. */

import { base64Encode } from "./bigmath.js";
import type { KeyBundle } from "./bundle.js";
import { parseBundle } from "./bundle.js";
import { encZero, serializeChunk } from "./djclient.js";
import { sealChunk } from "./envelope.js";
import type { ManifestQueue } from "./manifest.js";
import { parseManifest } from "./manifest.js";

export interface ClientState {
  bundle: KeyBundle;
  guardUrl: string;
  manifest: ManifestQueue | null;
  intervalMs: number;
  submitted: number;
  drained: number;
}

export function createState(
  bundleBytes: Uint8Array,
  guardUrl: string,
  manifestBytes?: Uint8Array,
  intervalMs = 1000,
): ClientState {
  return {
    bundle: parseBundle(bundleBytes),
    guardUrl,
    manifest: manifestBytes ? parseManifest(manifestBytes) : null,
    intervalMs,
    submitted: 0,
    drained: 0,
  };
}

/** The next wire body: a queued chunk if one remains, else a fresh zero. */
export async function nextBody(state: ClientState): Promise<{ body: string; mode: "drain" | "zero" }> {
  const queued = state.manifest?.next() ?? null;
  if (queued !== null) {
    state.drained += 1;
    return { body: base64Encode(queued), mode: "drain" };
  }
  const sealed = await sealChunk(
    state.bundle.envPublic,
    serializeChunk(state.bundle, encZero(state.bundle)),
  );
  return { body: base64Encode(sealed), mode: "zero" };
}

export async function submitOnce(
  state: ClientState,
): Promise<{ mode: "drain" | "zero"; bodyLength: number }> {
  const { body, mode } = await nextBody(state);
  try {
    await fetch(state.guardUrl, {
      method: "POST",
      headers: { "Content-Type": "application/octet-stream" },
      body,
    });
  } catch {
    // fire and forget
  }
  state.submitted += 1;
  return { mode, bodyLength: body.length };
}

export async function runLoop(state: ClientState, count: number): Promise<void> {
  for (let j = 0; j < count; j++) {
    await submitOnce(state);
    if (state.intervalMs > 0 && j + 1 < count) {
      await new Promise((resolve) => setTimeout(resolve, state.intervalMs));
    }
  }
}
