/**
 * Box overlay rendering.
 *
 * Positions come solely from the response's embedded pixel boxes
 * (`detections[].box_px`), scaled to the displayed image size. Nothing
 * is detected or recomputed client-side.
 */

import type { Detection, PipelineResult } from './types';

const COLORS = ['#e6194b', '#3cb44b', '#4363d8', '#f58231', '#911eb4', '#46f0f0', '#f032e6'];

export interface OverlayBox {
  phrase: string;
  score: number;
  left: number;
  top: number;
  width: number;
  height: number;
}

/** Scale the response's pixel boxes to the displayed size. */
export function overlayBoxes(result: PipelineResult, scale: number): OverlayBox[] {
  return result.detections
    .filter((d): d is Detection & { box_px: NonNullable<Detection['box_px']> } => d.box_px !== null)
    .map((d) => ({
      phrase: d.phrase,
      score: d.score,
      left: d.box_px.x * scale,
      top: d.box_px.y * scale,
      width: d.box_px.w * scale,
      height: d.box_px.h * scale,
    }));
}

/** Replace `container`'s overlay boxes with the result's detections. */
export function renderOverlay(
  container: HTMLElement,
  result: PipelineResult,
  scale: number,
): HTMLElement[] {
  container.querySelectorAll('.overlay-box').forEach((el) => el.remove());
  const rendered: HTMLElement[] = [];
  overlayBoxes(result, scale).forEach((box, i) => {
    const el = document.createElement('div');
    el.className = 'overlay-box';
    el.dataset.phrase = box.phrase;
    const color = COLORS[i % COLORS.length] ?? COLORS[0]!;
    el.style.position = 'absolute';
    el.style.left = `${box.left}px`;
    el.style.top = `${box.top}px`;
    el.style.width = `${box.width}px`;
    el.style.height = `${box.height}px`;
    el.style.border = `2px solid ${color}`;

    const label = document.createElement('span');
    label.className = 'overlay-label';
    label.textContent = `${box.phrase} ${box.score.toFixed(2)}`;
    label.style.background = color;
    el.appendChild(label);

    container.appendChild(el);
    rendered.push(el);
  });
  return rendered;
}
