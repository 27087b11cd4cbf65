import { ApiClient, ConflictError, ServiceUnreachable, ValidationError } from "./api.js";
import type { Category, Filter, Sample, Severity } from "./types.js";
import { severityEnabled } from "./types.js";

export interface Pending {
  category: Category | null;
  severity: Severity | null;
}

export interface Conflict {
  key: string;
  attempted: Pending;
  current: Sample; // the newer value the server reported
}

type Listener = () => void;

/**
 * All UI behavior lives here; DOM handlers and keyboard shortcuts call the
 * same methods, so a scripted sequence of method calls IS the click path.
 */
export class TriageController {
  samples: Sample[] = [];
  selected = 0;
  filter: Filter = "all";
  annotated = 0;
  totalAll = 0;
  banner: string | null = null; // blocking service-unreachable banner
  inlineError: string | null = null; // per-sample validation message
  conflict: Conflict | null = null;
  pending: Pending = { category: null, severity: null };

  private listeners: Listener[] = [];

  constructor(private api: ApiClient) {}

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  current(): Sample | null {
    return this.samples[this.selected] ?? null;
  }

  progress(): { annotated: number; total: number } {
    return { annotated: this.annotated, total: this.totalAll };
  }

  async loadQueue(filter?: Filter): Promise<void> {
    if (filter !== undefined) this.filter = filter;
    try {
      const page = await this.api.listSamples(this.filter);
      this.samples = page.samples;
      this.annotated = page.annotated;
      this.totalAll = page.total_all;
      this.selected = Math.min(this.selected, Math.max(0, this.samples.length - 1));
      this.banner = null;
    } catch (err) {
      if (err instanceof ServiceUnreachable) {
        this.banner = "Annotation service unreachable; fix the connection and retry.";
      } else {
        this.banner = String((err as Error).message ?? err);
      }
    }
    this.notify();
  }

  select(index: number): void {
    if (index >= 0 && index < this.samples.length) {
      this.selected = index;
      this.resetPending();
      this.notify();
    }
  }

  selectNext(): void {
    this.select(Math.min(this.selected + 1, this.samples.length - 1));
  }

  selectPrev(): void {
    this.select(Math.max(this.selected - 1, 0));
  }

  private resetPending(): void {
    this.pending = { category: null, severity: null };
    this.inlineError = null;
  }

  severityControlEnabled(): boolean {
    return severityEnabled(this.pending.category);
  }

  chooseCategory(category: Category): void {
    this.pending.category = category;
    if (!severityEnabled(category)) this.pending.severity = null;
    this.inlineError = null;
    this.notify();
  }

  /** No-op while the severity control is disabled (mirrors the server rule;
   * a disabled control sends no request either). */
  chooseSeverity(severity: "High" | "Low"): void {
    if (!this.severityControlEnabled()) return;
    this.pending.severity = severity;
    this.notify();
  }

  canSubmit(): boolean {
    if (this.pending.category === null) return false;
    if (severityEnabled(this.pending.category)) return this.pending.severity !== null;
    return true;
  }

  async submit(): Promise<void> {
    const sample = this.current();
    if (sample === null) return;
    if (!this.canSubmit()) {
      this.inlineError = severityEnabled(this.pending.category)
        ? "Pick High or Low severity for a clinically relevant change."
        : "Pick a category first.";
      this.notify();
      return;
    }
    await this.post(sample.key, this.pending, sample.version);
  }

  private async post(key: string, pending: Pending, baseVersion?: number): Promise<void> {
    try {
      const updated = await this.api.annotate(
        key,
        pending.category as Category,
        pending.severity ?? undefined,
        baseVersion,
      );
      this.applyUpdate(updated);
      this.conflict = null;
      this.resetPending();
      this.selectNextUnannotated();
    } catch (err) {
      if (err instanceof ConflictError) {
        // keep the attempt; the user must explicitly overwrite the newer value
        this.conflict = { key, attempted: { ...pending }, current: err.current };
      } else if (err instanceof ValidationError) {
        this.inlineError = err.message;
      } else if (err instanceof ServiceUnreachable) {
        this.banner = "Annotation service unreachable; your selection was kept, retry submit.";
      } else {
        this.inlineError = String((err as Error).message ?? err);
      }
    }
    this.notify();
  }

  private applyUpdate(updated: Sample): void {
    const i = this.samples.findIndex((s) => s.key === updated.key);
    if (i >= 0) {
      const wasAnnotated = this.samples[i].category !== "Unknown";
      this.samples[i] = updated;
      if (!wasAnnotated && updated.category !== "Unknown") this.annotated += 1;
    }
  }

  private selectNextUnannotated(): void {
    for (let step = 1; step <= this.samples.length; step++) {
      const i = (this.selected + step) % this.samples.length;
      if (this.samples[i] && this.samples[i].category === "Unknown") {
        this.selected = i;
        return;
      }
    }
  }

  /** Explicit overwrite after a version conflict: resend unconditionally. */
  async overwriteConflict(): Promise<void> {
    if (this.conflict === null) return;
    const { key, attempted } = this.conflict;
    await this.post(key, attempted, undefined);
  }

  /** Keep the newer value the other annotator wrote. */
  acceptConflict(): void {
    if (this.conflict === null) return;
    this.applyUpdate(this.conflict.current);
    this.conflict = null;
    this.resetPending();
    this.notify();
  }
}
