/** Client for the documented detection API; no private endpoints. */

import type { ErrorBody, PipelineResult } from './types';

/** Upload ceiling advertised by the service; enforced client-side too. */
export const MAX_UPLOAD_BYTES = 8_000_000;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ErrorBody,
  ) {
    super(`${body.stage}: ${body.detail}`);
  }
}

export class OversizeError extends Error {
  constructor(readonly size: number, readonly limit: number) {
    super(`image is ${size} bytes; the server accepts at most ${limit}`);
  }
}

export interface DetectRequest {
  query: string;
  image?: { name: string; data: Blob };
  imageUrl?: string;
  threshold?: number;
}

export function checkUploadSize(size: number, limit: number = MAX_UPLOAD_BYTES): void {
  if (size > limit) throw new OversizeError(size, limit);
}

export async function detect(
  baseUrl: string,
  request: DetectRequest,
  signal?: AbortSignal,
): Promise<PipelineResult> {
  const form = new FormData();
  form.set('query', request.query);
  if (request.threshold !== undefined) form.set('threshold', String(request.threshold));
  if (request.image) {
    checkUploadSize(request.image.data.size);
    form.set('image', request.image.data, request.image.name);
  } else if (request.imageUrl) {
    form.set('image_url', request.imageUrl);
  }

  const response = await fetch(`${baseUrl}/v1/detect`, { method: 'POST', body: form, signal });
  if (!response.ok) {
    let body: ErrorBody;
    try {
      body = (await response.json()) as ErrorBody;
    } catch {
      body = { code: 'unknown', stage: 'transport', detail: response.statusText };
    }
    throw new ApiError(response.status, body);
  }
  return (await response.json()) as PipelineResult;
}
