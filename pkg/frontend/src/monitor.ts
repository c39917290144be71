/**
 * Propagation monitor: polls the progress endpoint (1 s by default) until the
 * job finishes or errors. DOM-free so the polling logic is unit-testable;
 * the app layer binds the callbacks to the progress bar and thumbnails.
 */

import { ProgressResponse, SessionApi } from "./api.js";

export interface MonitorCallbacks {
  onProgress: (p: ProgressResponse) => void;
  onDone: (p: ProgressResponse) => void;
  onError: (message: string) => void;
}

export class PropagationMonitor {
  private timer: ReturnType<typeof setInterval> | null = null;
  private polling = false;

  constructor(
    private api: SessionApi,
    private sessionId: string,
    private callbacks: MonitorCallbacks,
    private intervalMs = 1000
  ) {}

  start(): void {
    if (this.timer !== null) {
      return;
    }
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
    void this.tick();
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** One poll. Exposed for tests; start() drives it on the interval. */
  async tick(): Promise<void> {
    if (this.polling) {
      return; // never stack concurrent polls
    }
    this.polling = true;
    try {
      const progress = await this.api.progress(this.sessionId);
      this.callbacks.onProgress(progress);
      if (progress.job === "done") {
        this.stop();
        this.callbacks.onDone(progress);
      } else if (progress.job === "error") {
        this.stop();
        this.callbacks.onError(progress.error ?? "propagation failed");
      }
    } catch (err) {
      this.stop();
      this.callbacks.onError(err instanceof Error ? err.message : String(err));
    } finally {
      this.polling = false;
    }
  }
}
