import type { AttributeKind, ServiceConfig, Tokens } from './types.js';

export interface EncodeResult {
  mu: number[];
  sigma: number[];
  seed: number;
}

export interface DecodeResult {
  tokens: Tokens;
  seed: number;
}

export interface InterpolateResult {
  sequences: Tokens[];
  alphas: number[];
  seed: number;
}

export interface SampleResult {
  sequences: Tokens[];
  seed: number;
}

export interface ApplyResult {
  tokens: Tokens;
  z: number[];
  measured_before: number;
  measured_after: number;
  seed: number;
}

// The surface the controller talks to; tests substitute stubs for HttpApi.
export interface StudioApi {
  config(): Promise<ServiceConfig>;
  encode(tokens: Tokens, seed: number): Promise<EncodeResult>;
  decode(z: number[], temperature: number, seed: number): Promise<DecodeResult>;
  interpolate(
    a: Tokens,
    b: Tokens,
    alphas: number[],
    temperature: number,
    seed: number,
  ): Promise<InterpolateResult>;
  sample(n: number, temperature: number, seed: number): Promise<SampleResult>;
  measure(tokens: Tokens): Promise<Record<AttributeKind, number>>;
  applyAttribute(
    kind: AttributeKind,
    scale: number,
    source: { z: number[] } | { tokens: Tokens },
    temperature: number,
    seed: number,
  ): Promise<ApplyResult>;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class HttpApi implements StudioApi {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!res.ok) {
      const detail = await res.text();
      throw new ApiError(res.status, `${path} failed (${res.status}): ${detail}`);
    }
    return (await res.json()) as T;
  }

  async config(): Promise<ServiceConfig> {
    const res = await this.fetchFn(this.baseUrl + '/config');
    if (!res.ok) {
      throw new ApiError(res.status, `/config failed (${res.status})`);
    }
    return (await res.json()) as ServiceConfig;
  }

  encode(tokens: Tokens, seed: number): Promise<EncodeResult> {
    return this.post('/encode', { tokens, seed });
  }

  decode(z: number[], temperature: number, seed: number): Promise<DecodeResult> {
    return this.post('/decode', { z, temperature, seed });
  }

  interpolate(
    a: Tokens,
    b: Tokens,
    alphas: number[],
    temperature: number,
    seed: number,
  ): Promise<InterpolateResult> {
    return this.post('/interpolate', {
      tokens_a: a,
      tokens_b: b,
      alphas,
      temperature,
      seed,
    });
  }

  sample(n: number, temperature: number, seed: number): Promise<SampleResult> {
    return this.post('/sample', { n, temperature, seed });
  }

  async measure(tokens: Tokens): Promise<Record<AttributeKind, number>> {
    const res = await this.post<{ attributes: Record<AttributeKind, number> }>(
      '/attrs/measure',
      { tokens },
    );
    return res.attributes;
  }

  applyAttribute(
    kind: AttributeKind,
    scale: number,
    source: { z: number[] } | { tokens: Tokens },
    temperature: number,
    seed: number,
  ): Promise<ApplyResult> {
    return this.post('/attrs/apply', { kind, scale, temperature, seed, ...source });
  }
}
