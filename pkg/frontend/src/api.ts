import type { Category, Filter, Sample, SamplePage, Severity } from "./types.js";

export class ConflictError extends Error {
  constructor(public current: Sample) {
    super(`sample ${current.key} changed to version ${current.version}`);
  }
}

export class ValidationError extends Error {}

export class ServiceUnreachable extends Error {}

/** Thin client over the annotation service JSON API. */
export class ApiClient {
  constructor(private base: string = "") {}

  private url(path: string): string {
    return this.base + path;
  }

  async listSamples(filter: Filter, page = 1, pageSize = 200): Promise<SamplePage> {
    let resp: Response;
    try {
      resp = await fetch(
        this.url(`/samples?filter=${encodeURIComponent(filter)}&page=${page}&page_size=${pageSize}`),
      );
    } catch {
      throw new ServiceUnreachable("annotation service unreachable");
    }
    if (!resp.ok) {
      const body = await resp.json().catch(() => ({ error: resp.statusText }));
      throw new Error(body.error ?? `listing failed (${resp.status})`);
    }
    return (await resp.json()) as SamplePage;
  }

  async annotate(
    key: string,
    category: Category,
    severity?: Severity,
    baseVersion?: number,
  ): Promise<Sample> {
    const payload: Record<string, unknown> = { category };
    if (severity !== undefined) payload.severity = severity;
    if (baseVersion !== undefined) payload.base_version = baseVersion;
    let resp: Response;
    try {
      resp = await fetch(this.url(`/samples/${encodeURIComponent(key)}/annotation`), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      });
    } catch {
      throw new ServiceUnreachable("annotation service unreachable");
    }
    if (resp.status === 409) {
      const body = await resp.json();
      throw new ConflictError(body.current as Sample);
    }
    if (resp.status === 400) {
      const body = await resp.json().catch(() => ({ error: "invalid annotation" }));
      throw new ValidationError(body.error);
    }
    if (!resp.ok) {
      const body = await resp.json().catch(() => ({ error: resp.statusText }));
      throw new Error(body.error ?? `annotation failed (${resp.status})`);
    }
    return (await resp.json()) as Sample;
  }

  async exportCsv(): Promise<string> {
    const resp = await fetch(this.url("/export"));
    if (!resp.ok) throw new Error(`export failed (${resp.status})`);
    return await resp.text();
  }

  async tally(): Promise<Record<string, unknown>> {
    const resp = await fetch(this.url("/tally"));
    if (!resp.ok) throw new Error(`tally failed (${resp.status})`);
    return (await resp.json()) as Record<string, unknown>;
  }
}
