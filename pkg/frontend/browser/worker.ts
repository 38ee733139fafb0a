/** Background worker owning the submission loop, so key material and the
 * big-integer work never block the page. */

import { createState, submitOnce } from "../src/client.js";
import type { ClientState } from "../src/client.js";

let state: ClientState | null = null;
let timer: ReturnType<typeof setInterval> | null = null;

interface StartMessage {
  type: "start";
  bundle: Uint8Array;
  guardUrl: string;
  manifest?: Uint8Array;
  intervalMs: number;
}

self.onmessage = async (event: MessageEvent<StartMessage | { type: "stop" }>) => {
  const msg = event.data;
  if (msg.type === "start") {
    state = createState(msg.bundle, msg.guardUrl, msg.manifest, msg.intervalMs);
    timer = setInterval(async () => {
      if (!state) return;
      const result = await submitOnce(state);
      self.postMessage({ submitted: state.submitted, mode: result.mode });
    }, msg.intervalMs);
  } else if (msg.type === "stop" && timer !== null) {
    clearInterval(timer);
    timer = null;
    state = null;
  }
};
