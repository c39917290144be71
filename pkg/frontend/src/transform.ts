/**
 * Zoom/pan mapping between canvas space and image pixel space.
 * canvasX = imageCol * scale + panX, canvasY = imageRow * scale + panY,
 * so an image pixel (row, col) covers the half-open canvas square
 * [col*s+panX, (col+1)*s+panX) x [row*s+panY, (row+1)*s+panY).
 */

export interface ViewTransform {
  scale: number;
  panX: number;
  panY: number;
}

export interface ImagePoint {
  row: number; // continuous image coordinates
  col: number;
}

export function imageToCanvas(t: ViewTransform, p: ImagePoint): { x: number; y: number } {
  return { x: p.col * t.scale + t.panX, y: p.row * t.scale + t.panY };
}

export function canvasToImage(t: ViewTransform, x: number, y: number): ImagePoint {
  return { col: (x - t.panX) / t.scale, row: (y - t.panY) / t.scale };
}

/** The integer pixel under a canvas point, or null when outside the image. */
export function canvasToPixel(
  t: ViewTransform,
  x: number,
  y: number,
  height: number,
  width: number
): { row: number; col: number } | null {
  const p = canvasToImage(t, x, y);
  const row = Math.floor(p.row);
  const col = Math.floor(p.col);
  if (row < 0 || col < 0 || row >= height || col >= width) {
    return null;
  }
  return { row, col };
}

/** Zoom about a canvas anchor point, keeping the anchored image point fixed. */
export function zoomAt(t: ViewTransform, factor: number, x: number, y: number): ViewTransform {
  const scale = t.scale * factor;
  return {
    scale,
    panX: x - (x - t.panX) * factor,
    panY: y - (y - t.panY) * factor,
  };
}

export function panBy(t: ViewTransform, dx: number, dy: number): ViewTransform {
  return { scale: t.scale, panX: t.panX + dx, panY: t.panY + dy };
}

/** Fit an image into a canvas, centered. */
export function fitTransform(
  canvasW: number,
  canvasH: number,
  imageW: number,
  imageH: number
): ViewTransform {
  const scale = Math.min(canvasW / imageW, canvasH / imageH);
  return {
    scale,
    panX: (canvasW - imageW * scale) / 2,
    panY: (canvasH - imageH * scale) / 2,
  };
}
