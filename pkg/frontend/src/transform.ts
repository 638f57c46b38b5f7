/**
 * Camera mapping between box coordinates (the unit square, y up) and
 * screen pixels (y down). scale is pixels per world unit; (x, y) is the
 * screen position of the world origin's bottom-left corner.
 */

export interface Camera {
  scale: number;
  x: number;
  y: number;
}

export function worldToScreen(cam: Camera, wx: number, wy: number): [number, number] {
  return [cam.x + wx * cam.scale, cam.y - wy * cam.scale];
}

export function screenToWorld(cam: Camera, sx: number, sy: number): [number, number] {
  return [(sx - cam.x) / cam.scale, (cam.y - sy) / cam.scale];
}

/** Fit the unit box into a viewport with a pixel margin on every side. */
export function fitBox(viewportW: number, viewportH: number, margin = 24): Camera {
  const scale = Math.max(1, Math.min(viewportW, viewportH) - 2 * margin);
  return {
    scale,
    x: (viewportW - scale) / 2,
    y: (viewportH - scale) / 2 + scale,
  };
}

export function pan(cam: Camera, dxPixels: number, dyPixels: number): Camera {
  return { scale: cam.scale, x: cam.x + dxPixels, y: cam.y + dyPixels };
}

/**
 * Zoom by a factor keeping the world point under (sx, sy) fixed on
 * screen. Scale is clamped to a sane range so the box can neither
 * degenerate nor overflow float precision.
 */
export function zoomAt(cam: Camera, sx: number, sy: number, factor: number): Camera {
  const scale = Math.min(1e6, Math.max(10, cam.scale * factor));
  const applied = scale / cam.scale;
  return {
    scale,
    x: sx - (sx - cam.x) * applied,
    y: sy - (sy - cam.y) * applied,
  };
}
