// Thin client for /api/v1. Every mutating call carries an Idempotency-Key;
// retries of the same logical action must reuse the same key.

import type {
  ConsensusResult,
  CurrentUser,
  DemographyResponse,
  NoveltyEvent,
  Observation,
  Page,
  TaxonomyTree,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export function newIdempotencyKey(): string {
  if (typeof crypto !== "undefined" && "randomUUID" in crypto) {
    return crypto.randomUUID();
  }
  return `key-${Date.now()}-${Math.floor(Math.random() * 1e9)}`;
}

export interface SubmitMetadata {
  latitude: number;
  longitude: number;
  captured_at: number;
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private token: string = "",
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  imageUrl(ref: string): string {
    return `${this.baseUrl}/api/v1/images/${ref}`;
  }

  private headers(idemKey?: string, json = false): Record<string, string> {
    const out: Record<string, string> = {};
    if (this.token) out["Authorization"] = `Bearer ${this.token}`;
    if (idemKey) out["Idempotency-Key"] = idemKey;
    if (json) out["Content-Type"] = "application/json";
    return out;
  }

  private async parse<T>(resp: Response): Promise<T> {
    if (!resp.ok) {
      let code = "http_error";
      let message = `${resp.status}`;
      try {
        const body = await resp.json();
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  private get<T>(path: string): Promise<T> {
    return fetch(`${this.baseUrl}${path}`, { headers: this.headers() }).then((r) =>
      this.parse<T>(r),
    );
  }

  me(): Promise<CurrentUser> {
    return this.get("/api/v1/me");
  }

  taxonomy(): Promise<TaxonomyTree> {
    return this.get("/api/v1/taxonomy");
  }

  listObservations(params: {
    status?: string;
    taxon?: string;
    cursor?: string;
    limit?: number;
  } = {}): Promise<Page<Observation>> {
    const query = new URLSearchParams();
    if (params.status) query.set("status", params.status);
    if (params.taxon) query.set("taxon", params.taxon);
    if (params.cursor) query.set("cursor", params.cursor);
    if (params.limit) query.set("limit", String(params.limit));
    const suffix = query.size ? `?${query.toString()}` : "";
    return this.get(`/api/v1/observations${suffix}`);
  }

  getObservation(id: string): Promise<Observation> {
    return this.get(`/api/v1/observations/${id}`);
  }

  disputed(cursor?: string): Promise<Page<Observation>> {
    const suffix = cursor ? `?cursor=${encodeURIComponent(cursor)}` : "";
    return this.get(`/api/v1/disputed${suffix}`);
  }

  demography(taxon: string, cellSize?: number): Promise<DemographyResponse> {
    const query = new URLSearchParams({ taxon });
    if (cellSize !== undefined) query.set("cell_size", String(cellSize));
    return this.get(`/api/v1/demography?${query.toString()}`);
  }

  novelty(cellSize?: number): Promise<{ events: NoveltyEvent[] }> {
    const suffix = cellSize !== undefined ? `?cell_size=${cellSize}` : "";
    return this.get(`/api/v1/novelty${suffix}`);
  }

  async submitObservation(
    image: Blob,
    filename: string,
    metadata: SubmitMetadata,
    idemKey: string,
  ): Promise<Observation> {
    const form = new FormData();
    form.append("image", image, filename);
    form.append("metadata", JSON.stringify(metadata));
    const resp = await fetch(`${this.baseUrl}/api/v1/observations`, {
      method: "POST",
      headers: this.headers(idemKey),
      body: form,
    });
    return this.parse<Observation>(resp);
  }

  async castVote(
    observationId: string,
    taxonId: string,
    idemKey: string,
  ): Promise<ConsensusResult> {
    const resp = await fetch(`${this.baseUrl}/api/v1/observations/${observationId}/votes`, {
      method: "POST",
      headers: this.headers(idemKey, true),
      body: JSON.stringify({ taxon_id: taxonId }),
    });
    return this.parse<ConsensusResult>(resp);
  }

  async resolve(
    observationId: string,
    taxonId: string,
    idemKey: string,
  ): Promise<ConsensusResult> {
    const resp = await fetch(`${this.baseUrl}/api/v1/observations/${observationId}/resolve`, {
      method: "POST",
      headers: this.headers(idemKey, true),
      body: JSON.stringify({ taxon_id: taxonId }),
    });
    return this.parse<ConsensusResult>(resp);
  }
}
