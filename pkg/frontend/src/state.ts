/** Session state: the current profile, pending edits, probe history, and
 * the stale-response guard.
 *
 * Submissions are debounced and sequence-numbered. A response is applied
 * only if no newer submission has already been applied, so a slow old
 * response can never overwrite a fresh one.
 */

import type { ExplanationDoc, FeatureMap } from './types.js';

export interface HistoryPoint {
  /** What changed, e.g. "bun=55" or "base". */
  label: string;
  probability: number;
}

export class Session {
  model: string | null = null;
  /** Last successfully submitted profile. */
  base: FeatureMap = {};
  /** Edits made since the last successful submission. */
  pending: FeatureMap = {};
  history: HistoryPoint[] = [];
  latest: ExplanationDoc | null = null;

  private issued = 0;
  private applied = 0;

  nextSeq(): number {
    this.issued += 1;
    return this.issued;
  }

  /** True when the response for `seq` should be applied (not superseded). */
  accept(seq: number): boolean {
    if (seq <= this.applied) return false;
    this.applied = seq;
    return true;
  }

  get lastIssued(): number {
    return this.issued;
  }

  setField(name: string, value: FeatureMap[string]): void {
    if (this.base[name] === value) {
      delete this.pending[name];
    } else {
      this.pending[name] = value;
    }
  }

  mergedFeatures(): FeatureMap {
    return { ...this.base, ...this.pending };
  }

  pendingLabel(): string {
    const parts = Object.entries(this.pending).map(([k, v]) => `${k}=${v}`);
    return parts.length ? parts.join(', ') : 'base';
  }

  /** Snapshot what a submission is about to probe. */
  captureProbe(): Probe {
    return {
      seq: this.nextSeq(),
      features: this.mergedFeatures(),
      pending: { ...this.pending },
      label: this.pendingLabel(),
    };
  }

  /** Commit a successful probe unless a newer one was already applied.
   * Edits made while the request was in flight stay pending. */
  applyProbe(probe: Probe, probability: number,
             explanation: ExplanationDoc | null): boolean {
    if (!this.accept(probe.seq)) return false;
    this.base = probe.features;
    for (const [name, value] of Object.entries(probe.pending)) {
      if (this.pending[name] === value) delete this.pending[name];
    }
    this.history.push({ label: probe.label, probability });
    if (explanation) this.latest = explanation;
    return true;
  }
}

export interface Probe {
  seq: number;
  features: FeatureMap;
  pending: FeatureMap;
  label: string;
}

/** Debounces calls and keeps at most one request in flight; when a call
 * lands while another is running, only the newest is replayed afterwards. */
export class SubmitQueue {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private queued = false;

  constructor(
    private readonly run: () => Promise<void>,
    private readonly debounceMs: number = 200,
  ) {}

  request(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.launch();
    }, this.debounceMs);
  }

  /** Submit immediately (used for the initial load and model switches). */
  flush(): Promise<void> {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    return this.launch();
  }

  private async launch(): Promise<void> {
    if (this.inFlight) {
      this.queued = true;
      return;
    }
    this.inFlight = true;
    try {
      await this.run();
    } finally {
      this.inFlight = false;
      if (this.queued) {
        this.queued = false;
        void this.launch();
      }
    }
  }
}
