/** Page bootstrap: fetch the key bundle, start the worker, show counters. */

const statusEl = document.getElementById("status")!;
const worker = new Worker(new URL("./worker.js", import.meta.url), { type: "module" });

worker.onmessage = (event: MessageEvent<{ submitted: number; mode: string }>) => {
  statusEl.textContent = `submissions: ${event.data.submitted} (last: ${event.data.mode})`;
};

async function start(): Promise<void> {
  const bundle = new Uint8Array(await (await fetch("/bundle.alk1")).arrayBuffer());
  worker.postMessage({
    type: "start",
    bundle,
    guardUrl: "/a",
    intervalMs: 2000,
  });
}

document.getElementById("start")!.addEventListener("click", () => void start());
document.getElementById("stop")!.addEventListener("click", () => worker.postMessage({ type: "stop" }));
