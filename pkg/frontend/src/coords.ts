// Pixel-exact coordinate mapping. The image is only ever displayed at
// integer zoom factors, so a click maps to exactly one source pixel and a
// click at (x, y) under 1:1 zoom posts exactly (row = y, col = x).

export interface PixelCoord {
  row: number;
  col: number;
}

export function assertIntegerZoom(zoom: number): void {
  if (!Number.isInteger(zoom) || zoom < 1) {
    throw new Error(`zoom must be a positive integer, got ${zoom}`);
  }
}

export function displayToImage(x: number, y: number, zoom: number): PixelCoord {
  assertIntegerZoom(zoom);
  return { row: Math.floor(y / zoom), col: Math.floor(x / zoom) };
}

export function imageToDisplay(coord: PixelCoord, zoom: number): { x: number; y: number } {
  assertIntegerZoom(zoom);
  return { x: coord.col * zoom, y: coord.row * zoom };
}
