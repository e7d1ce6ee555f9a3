/** Canvas-space to image-pixel coordinate mapping. */

export interface ViewGeometry {
  /** image size in pixels */
  width: number;
  height: number;
  /** displayed canvas size in CSS pixels */
  canvasWidth: number;
  canvasHeight: number;
}

export interface PixelCoord {
  u: number;
  v: number;
}

/**
 * Map a canvas-relative event position to image pixel coordinates,
 * accounting for display scaling. Returns null for positions outside the
 * image (such clicks are ignored).
 */
export function canvasToPixel(
  x: number,
  y: number,
  geom: ViewGeometry,
): PixelCoord | null {
  if (geom.canvasWidth <= 0 || geom.canvasHeight <= 0) return null;
  const u = Math.floor((x * geom.width) / geom.canvasWidth);
  const v = Math.floor((y * geom.height) / geom.canvasHeight);
  if (u < 0 || u >= geom.width || v < 0 || v >= geom.height) return null;
  return { u, v };
}

/** Inverse mapping for drawing markers at click positions. */
export function pixelToCanvas(u: number, v: number, geom: ViewGeometry) {
  return {
    x: ((u + 0.5) * geom.canvasWidth) / geom.width,
    y: ((v + 0.5) * geom.canvasHeight) / geom.height,
  };
}
