/** Parser for prepared submission manifests (magic "ALKM"): a queue of
 * pre-sealed chunks the client drains one per submission. */

export interface ManifestQueue {
  k: bigint;
  n: number;
  n2: number;
  cursor: number;
  sealed: Uint8Array[];
  next(): Uint8Array | null;
  exhausted(): boolean;
}

export function parseManifest(data: Uint8Array): ManifestQueue {
  const magic = new TextDecoder().decode(data.subarray(0, 4));
  if (magic !== "ALKM") throw new Error("not a manifest");
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const k = view.getBigUint64(4);
  const n = view.getUint32(12);
  const n2 = view.getUint32(16);
  const cursor = view.getUint32(20);
  const width = view.getUint32(24);
  const body = data.subarray(28);
  if (width === 0 || body.length !== n2 * width) throw new Error("manifest length mismatch");
  const sealed: Uint8Array[] = [];
  for (let j = 0; j < n2; j++) sealed.push(body.subarray(j * width, (j + 1) * width));
  const queue = {
    k,
    n,
    n2,
    cursor,
    sealed,
    next(): Uint8Array | null {
      if (queue.cursor >= queue.n2) return null;
      return sealed[queue.cursor++];
    },
    exhausted(): boolean {
      return queue.cursor >= queue.n2;
    },
  };
  return queue;
}
