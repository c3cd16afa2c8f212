/** Test transport: multipart POST built by hand (no jsdom FormData). */

import { readFileSync } from 'node:fs';
import path from 'node:path';

import type { PipelineResult } from '../src/types';

export const BASE_URL = 'http://127.0.0.1:8018';
// vitest runs with cwd = frontend/; the fixtures live one level up.
export const ROOT = path.resolve(process.cwd(), '..');

export interface Scenario {
  name: string;
  image: string;
  query: string;
  detections_default: number;
  detections_hi: number;
  hi_threshold: number;
}

export function loadScenarios(): Scenario[] {
  const doc = JSON.parse(readFileSync(path.join(ROOT, 'fixtures', 'scenarios.json'), 'utf-8'));
  return doc.scenarios as Scenario[];
}

export async function postDetect(
  imageFile: string,
  query: string,
  threshold?: number,
): Promise<PipelineResult> {
  const boundary = '----reasondetboundary';
  const imageBytes = readFileSync(path.join(ROOT, 'fixtures', 'images', imageFile));

  const fields: string[] = [];
  fields.push(
    `--${boundary}\r\nContent-Disposition: form-data; name="query"\r\n\r\n${query}\r\n`,
  );
  if (threshold !== undefined) {
    fields.push(
      `--${boundary}\r\nContent-Disposition: form-data; name="threshold"\r\n\r\n${threshold}\r\n`,
    );
  }
  const head = Buffer.from(
    fields.join('') +
      `--${boundary}\r\nContent-Disposition: form-data; name="image"; filename="${imageFile}"\r\n` +
      'Content-Type: image/png\r\n\r\n',
    'utf-8',
  );
  const tail = Buffer.from(`\r\n--${boundary}--\r\n`, 'utf-8');
  const body = Buffer.concat([head, imageBytes, tail]);

  const response = await fetch(`${BASE_URL}/v1/detect`, {
    method: 'POST',
    headers: { 'Content-Type': `multipart/form-data; boundary=${boundary}` },
    body,
  });
  if (!response.ok) {
    throw new Error(`detect failed (${response.status}): ${await response.text()}`);
  }
  return (await response.json()) as PipelineResult;
}
