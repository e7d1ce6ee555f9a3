/** Mask-over-image compositing on raw RGBA buffers (canvas-independent). */

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

/** Mask tint (green) and click marker colors: blue = positive, red = negative. */
export const MASK_TINT: Rgb = { r: 64, g: 220, b: 96 };
export const POSITIVE_COLOR = "#2563eb";
export const NEGATIVE_COLOR = "#dc2626";

export function markerColor(positive: boolean): string {
  return positive ? POSITIVE_COLOR : NEGATIVE_COLOR;
}

/**
 * Alpha-blend a probability mask over a base image.
 *
 * ``base`` is RGBA (4 bytes/pixel); ``mask`` holds one grayscale byte per
 * pixel (0..255 = probability 0..1). The effective per-pixel alpha is
 * ``opacity * mask/255``; opacity 0 returns the base bytes untouched.
 */
export function compositeOverlay(
  base: Uint8ClampedArray,
  mask: Uint8ClampedArray,
  opacity: number,
  tint: Rgb = MASK_TINT,
): Uint8ClampedArray {
  if (base.length !== mask.length * 4) {
    throw new Error(
      `overlay size mismatch: base ${base.length / 4} px, mask ${mask.length} px`,
    );
  }
  const out = new Uint8ClampedArray(base);
  if (opacity <= 0) return out;
  const op = Math.min(1, opacity);
  for (let i = 0; i < mask.length; i++) {
    const a = (op * mask[i]) / 255;
    const j = i * 4;
    out[j] = base[j] * (1 - a) + tint.r * a;
    out[j + 1] = base[j + 1] * (1 - a) + tint.g * a;
    out[j + 2] = base[j + 2] * (1 - a) + tint.b * a;
    out[j + 3] = 255;
  }
  return out;
}

/** First byte of each RGBA pixel from a grayscale RGBA buffer. */
export function grayFromRgba(rgba: Uint8ClampedArray): Uint8ClampedArray {
  const out = new Uint8ClampedArray(rgba.length / 4);
  for (let i = 0; i < out.length; i++) out[i] = rgba[i * 4];
  return out;
}
