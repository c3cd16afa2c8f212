/** Wire types mirroring the service's published response schemas. */

export interface NormalizedBox {
  cx: number;
  cy: number;
  w: number;
  h: number;
}

export interface PixelBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface Detection {
  phrase: string;
  box: NormalizedBox;
  score: number;
  /** Pixel-space sidecar; null when the server could not size the image. */
  box_px: PixelBox | null;
}

export interface AnswerDoc {
  reasoning: string;
  phrases: string[];
  tier: string | null;
  full_text?: string;
}

export interface FailureDoc {
  kind:
    | 'ReasonerNoMarker'
    | 'ReasonerEmptyList'
    | 'DetectorMissedAll'
    | 'DetectorPartial'
    | 'BackendError';
  detail: string;
}

export interface PipelineResult {
  schema_version: string;
  query: string;
  image: { id: string; width_px: number | null; height_px: number | null };
  answer: AnswerDoc | null;
  detections: Detection[];
  undetected_phrases: string[];
  failure: FailureDoc | null;
  lint_notes: string[];
  timings_ms: Record<string, number>;
}

export interface ErrorBody {
  code: string;
  stage: string;
  detail: string;
}
