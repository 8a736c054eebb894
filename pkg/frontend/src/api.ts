/**
 * Typed client for the davots HTTP API. All pixel data arrives as
 * base64-encoded little-endian float32 arrays with declared shapes.
 */

export interface DatasetMeta {
  stages: string[];
  series_length: number;
  class_count: number;
  sample_counts: Record<string, number>;
  has_model: boolean;
}

export interface MetaDocument {
  datasets: Record<string, DatasetMeta>;
  attribution_methods: string[];
  distance_kinds: string[];
  linkages: string[];
  cluster_bases: string[];
  defaults: { window: number };
}

export interface OrderingRequest {
  dataset: string;
  stage: string;
  base: string;
  distance: string;
  linkage: string;
  method?: string | null;
}

export interface OrderingResponse {
  ordering_id: string;
  permutation: number[];
  score: number;
}

export interface EncodedArray {
  dtype: string;
  endianness: string;
  shape: number[];
  data: string;
}

export interface ScaleDoc {
  kind: "sequential" | "diverging";
  lo: number;
  mid: number | null;
  hi: number;
  colors: number[][];
}

export const GROUP_ORDER = [
  "raw",
  "raw_hist",
  "activations",
  "act_hist",
  "attributions",
  "attr_hist",
  "prediction",
] as const;

export type GroupName = (typeof GROUP_ORDER)[number];

export interface SliceDocument {
  offset: number;
  count: number;
  group_order: string[];
  sample_indices: number[];
  labels: number[];
  groups: Record<string, EncodedArray>;
  scales: Record<string, ScaleDoc>;
  ordering_source: Record<string, string>;
}

export interface StddevDocument {
  base: string;
  values: number[];
  permutation: number[];
}

export interface DecodedArray {
  shape: number[];
  values: Float32Array;
}

/** Decode the base64 float32 wire form into a flat typed array. */
export function decodeArray(doc: EncodedArray): DecodedArray {
  if (doc.dtype !== "float32" || doc.endianness !== "little") {
    throw new Error(`unsupported array encoding ${doc.dtype}/${doc.endianness}`);
  }
  const binary = atob(doc.data);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  const values = new Float32Array(bytes.buffer);
  const expected = doc.shape.reduce((a, b) => a * b, 1);
  if (values.length !== expected) {
    throw new Error(`array has ${values.length} values, shape says ${expected}`);
  }
  return { shape: doc.shape, values };
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path);
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return (await resp.json()) as T;
  }

  meta(): Promise<MetaDocument> {
    return this.getJson<MetaDocument>("/api/meta");
  }

  async postOrdering(req: OrderingRequest): Promise<OrderingResponse> {
    const resp = await this.fetchFn(this.baseUrl + "/api/orderings", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return (await resp.json()) as OrderingResponse;
  }

  slice(
    orderingId: string,
    offset: number,
    count: number,
    attribution?: string,
  ): Promise<SliceDocument> {
    const params = new URLSearchParams({
      ordering_id: orderingId,
      offset: String(offset),
      count: String(count),
    });
    if (attribution) params.set("attribution", attribution);
    return this.getJson<SliceDocument>(`/api/slice?${params}`);
  }

  stddev(orderingId: string, base: string, method?: string): Promise<StddevDocument> {
    const params = new URLSearchParams({ ordering_id: orderingId, base });
    if (method) params.set("method", method);
    return this.getJson<StddevDocument>(`/api/stddev?${params}`);
  }
}
