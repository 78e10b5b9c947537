import { describe, expect, it } from 'vitest';
import { classCount, classToken, heatmapClass } from '../src/heatmap.js';

const T = [2.5, 5.0, 7.5];

describe('heatmapClass', () => {
  it('maps a missing margin to the dead class', () => {
    expect(heatmapClass(null, false, T)).toBe(0);
    expect(heatmapClass(null, true, T)).toBe(0);
  });

  it('maps an undecodable margin to the dead class even when numeric', () => {
    expect(heatmapClass(9.9, false, T)).toBe(0);
  });

  it('bins margins by strict threshold comparison', () => {
    expect(heatmapClass(0.0, true, T)).toBe(1);
    expect(heatmapClass(2.5, true, T)).toBe(1); // not strictly above
    expect(heatmapClass(2.51, true, T)).toBe(2);
    expect(heatmapClass(5.0, true, T)).toBe(2);
    expect(heatmapClass(5.01, true, T)).toBe(3);
    expect(heatmapClass(7.5, true, T)).toBe(3);
    expect(heatmapClass(7.51, true, T)).toBe(4);
    expect(heatmapClass(100, true, T)).toBe(4);
  });

  it('adapts to whatever thresholds the server publishes', () => {
    expect(heatmapClass(3, true, [1, 2])).toBe(3);
    expect(heatmapClass(3, true, [])).toBe(1);
    expect(classCount([1, 2])).toBe(4);
    expect(classCount(T)).toBe(5);
  });
});

describe('classToken', () => {
  it('gives every class a distinct hook and clamps out-of-range input', () => {
    const tokens = [0, 1, 2, 3, 4].map(classToken);
    expect(new Set(tokens).size).toBe(5);
    expect(classToken(-1)).toBe(classToken(0));
    expect(classToken(99)).toBe(classToken(4));
  });
});
