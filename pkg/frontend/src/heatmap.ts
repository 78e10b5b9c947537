// Eye-margin heatmap binning. Thresholds come from /api/schema so the UI
// never disagrees with the server about the class boundaries.

export function heatmapClass(
  marginV: number | null,
  decodable: boolean,
  thresholds: readonly number[],
): number {
  if (marginV === null || !decodable) return 0;
  let cls = 1;
  for (const t of thresholds) {
    if (marginV > t) cls += 1;
  }
  return cls;
}

export function classCount(thresholds: readonly number[]): number {
  return thresholds.length + 2; // unreachable bucket + (n+1) margin bands
}

const PALETTE = ['#m-dead', '#m-weak', '#m-ok', '#m-good', '#m-strong'];

/** CSS hook name for a class; clamps past the palette end. */
export function classToken(cls: number): string {
  const clamped = Math.max(0, Math.min(cls, PALETTE.length - 1));
  return PALETTE[clamped]!;
}
