// Deterministic force-directed layout. Same seed, same graph: same pixels.
// The seed lives with the project so reopening the studio redraws the graph
// exactly where it was.

export interface Point {
  x: number;
  y: number;
}

export interface LayoutEdge {
  source: string;
  target: string;
}

// mulberry32: tiny seedable PRNG, plenty for scattering nodes.
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const WIDTH = 960;
const HEIGHT = 640;
const ITERATIONS = 120;
const SPRING = 140;

export function computeLayout(
  nodes: string[],
  edges: LayoutEdge[],
  seed: number,
): Map<string, Point> {
  const rand = mulberry32(seed);
  const positions = new Map<string, Point>();
  const ordered = [...nodes].sort();
  for (const name of ordered) {
    positions.set(name, {
      x: WIDTH / 2 + (rand() - 0.5) * WIDTH * 0.8,
      y: HEIGHT / 2 + (rand() - 0.5) * HEIGHT * 0.8,
    });
  }
  const index = new Map(ordered.map((n, i) => [n, i]));
  const valid = edges.filter((e) => index.has(e.source) && index.has(e.target));

  for (let step = 0; step < ITERATIONS; step++) {
    const cooling = 1 - step / ITERATIONS;
    const force = new Map(ordered.map((n) => [n, { x: 0, y: 0 }]));
    // Pairwise repulsion.
    for (let i = 0; i < ordered.length; i++) {
      for (let j = i + 1; j < ordered.length; j++) {
        const a = positions.get(ordered[i])!;
        const b = positions.get(ordered[j])!;
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        const d2 = Math.max(dx * dx + dy * dy, 1);
        const push = (SPRING * SPRING) / d2;
        const d = Math.sqrt(d2);
        dx /= d;
        dy /= d;
        const fa = force.get(ordered[i])!;
        const fb = force.get(ordered[j])!;
        fa.x += dx * push;
        fa.y += dy * push;
        fb.x -= dx * push;
        fb.y -= dy * push;
      }
    }
    // Spring attraction along edges.
    for (const edge of valid) {
      const a = positions.get(edge.source)!;
      const b = positions.get(edge.target)!;
      let dx = a.x - b.x;
      let dy = a.y - b.y;
      const d = Math.max(Math.sqrt(dx * dx + dy * dy), 1);
      const pull = (d * d) / SPRING / SPRING;
      dx /= d;
      dy /= d;
      const fa = force.get(edge.source)!;
      const fb = force.get(edge.target)!;
      fa.x -= dx * pull * SPRING * 0.15;
      fa.y -= dy * pull * SPRING * 0.15;
      fb.x += dx * pull * SPRING * 0.15;
      fb.y += dy * pull * SPRING * 0.15;
    }
    for (const name of ordered) {
      const p = positions.get(name)!;
      const f = force.get(name)!;
      p.x += Math.max(-12, Math.min(12, f.x)) * cooling;
      p.y += Math.max(-12, Math.min(12, f.y)) * cooling;
      p.x = Math.max(60, Math.min(WIDTH - 60, p.x));
      p.y = Math.max(40, Math.min(HEIGHT - 40, p.y));
    }
  }
  // Round for stable serialization.
  for (const p of positions.values()) {
    p.x = Math.round(p.x * 100) / 100;
    p.y = Math.round(p.y * 100) / 100;
  }
  return positions;
}
