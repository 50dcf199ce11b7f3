// Plotting and interaction for the PolyFit demo. The wasm module exposes
// build/query calls that speak JSON; this file owns the canvases.
//
// Build the module first (see the repo README):
//   wasm-pack build crates/demo --target web --out-dir www/pkg

import init, {
  demo_build_1d,
  demo_query_1d,
  demo_build_2d,
  demo_query_2d,
} from "./pkg/polyfit_demo.js";

const $ = (id) => document.getElementById(id);

const SEG_COLORS = ["#e4572e", "#17bebb", "#ffc914", "#76b041", "#b07cd8", "#f28db2"];

// ---------------------------------------------------------------- 1-D panel

let fit = null; // last FitView
let sel1d = null; // {l, u} in data coordinates
let x1d = { lo: 0, hi: 1 };
let y1d = { lo: 0, hi: 1 };

function rebuild1d() {
  const n = +$("n").value;
  const deg = +$("deg").value;
  const delta = +$("delta").value;
  $("nv").textContent = n;
  $("degv").textContent = deg;
  $("deltav").textContent = delta;
  const t0 = performance.now();
  const out = JSON.parse(
    demo_build_1d($("kind").value, n, +$("seed").value, $("agg").value, deg, delta)
  );
  const ms = performance.now() - t0;
  if (out.error) {
    $("stats1d").textContent = "error: " + out.error;
    return;
  }
  fit = out;
  sel1d = null;
  // Default ε to the absolute-mode coupling so queries work immediately.
  const coupling = out.agg === "sum" || out.agg === "count" ? 2 : 1;
  $("qeps").value = coupling * out.delta;
  $("stats1d").textContent =
    `records: ${out.n}   segments: ${out.segment_count}   model bytes: ${out.model_bytes}` +
    `   built in ${ms.toFixed(1)} ms (wasm)`;
  $("result1d").textContent = "drag across the plot to query a range";
  $("result1d").className = "result";
  draw1d();
}

function draw1d() {
  const cv = $("plot1d");
  const ctx = cv.getContext("2d");
  ctx.clearRect(0, 0, cv.width, cv.height);
  if (!fit) return;

  const xs = fit.samples.map((s) => s[0]);
  const ys = fit.samples.map((s) => s[1]);
  for (const seg of fit.segments) for (const p of seg.curve) ys.push(p[1]);
  x1d = { lo: Math.min(...xs), hi: Math.max(...xs) };
  y1d = { lo: Math.min(...ys), hi: Math.max(...ys) };
  if (y1d.hi === y1d.lo) y1d.hi = y1d.lo + 1;
  const px = (k) => 40 + ((k - x1d.lo) / (x1d.hi - x1d.lo)) * (cv.width - 55);
  const py = (v) => cv.height - 25 - ((v - y1d.lo) / (y1d.hi - y1d.lo)) * (cv.height - 45);

  // selection shading
  if (sel1d) {
    ctx.fillStyle = "rgba(120,140,255,0.18)";
    const a = px(Math.min(sel1d.l, sel1d.u));
    const b = px(Math.max(sel1d.l, sel1d.u));
    ctx.fillRect(a, 10, Math.max(b - a, 1), cv.height - 35);
  }

  // axes
  ctx.strokeStyle = "#8888";
  ctx.beginPath();
  ctx.moveTo(40, 10);
  ctx.lineTo(40, cv.height - 25);
  ctx.lineTo(cv.width - 15, cv.height - 25);
  ctx.stroke();

  // exact function samples
  ctx.fillStyle = "#778";
  for (const [k, v] of fit.samples) ctx.fillRect(px(k) - 1, py(v) - 1, 2, 2);

  // fitted polynomials, one colour per segment, boundary ticks between
  fit.segments.forEach((seg, i) => {
    ctx.strokeStyle = SEG_COLORS[i % SEG_COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    seg.curve.forEach(([k, v], j) => {
      if (j === 0) ctx.moveTo(px(k), py(v));
      else ctx.lineTo(px(k), py(v));
    });
    ctx.stroke();
    if (i > 0) {
      ctx.strokeStyle = "#8886";
      ctx.setLineDash([4, 4]);
      ctx.beginPath();
      ctx.moveTo(px(seg.lo), 10);
      ctx.lineTo(px(seg.lo), cv.height - 25);
      ctx.stroke();
      ctx.setLineDash([]);
    }
  });
  ctx.lineWidth = 1;
}

function query1d() {
  if (!fit || !sel1d) return;
  const l = Math.min(sel1d.l, sel1d.u);
  const u = Math.max(sel1d.l, sel1d.u);
  const out = JSON.parse(demo_query_1d(l, u, $("qmode").value, +$("qeps").value));
  const box = $("result1d");
  if (out.error) {
    box.textContent = "error: " + out.error;
    box.className = "result refined";
    return;
  }
  box.className = out.refined ? "result refined" : "result";
  box.textContent =
    `[${l.toFixed(1)}, ${u.toFixed(1)}]  approx=${fmt(out.value)}  exact=${fmt(out.exact)}` +
    `  |err|=${fmt(out.abs_error)}  rel=${out.rel_error.toExponential(2)}` +
    `  ${out.refined ? "refined (exact fallback)" : "unrefined"}`;
}

const fmt = (v) =>
  !isFinite(v) ? String(v) : Math.abs(v) >= 1000 ? v.toFixed(0) : v.toPrecision(5);

function canvasX(cv, ev) {
  const r = cv.getBoundingClientRect();
  return ((ev.clientX - r.left) / r.width) * cv.width;
}

function dataK(cv, ev) {
  const x = canvasX(cv, ev);
  return x1d.lo + ((x - 40) / (cv.width - 55)) * (x1d.hi - x1d.lo);
}

{
  const cv = $("plot1d");
  let dragging = false;
  cv.addEventListener("pointerdown", (ev) => {
    dragging = true;
    cv.setPointerCapture(ev.pointerId);
    sel1d = { l: dataK(cv, ev), u: dataK(cv, ev) };
    draw1d();
  });
  cv.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    sel1d.u = dataK(cv, ev);
    draw1d();
  });
  cv.addEventListener("pointerup", () => {
    dragging = false;
    query1d();
  });
}

// ---------------------------------------------------------------- 2-D panel

let quad = null; // last QuadView
let sel2d = null;
const PAD2 = 15;

function rebuild2d() {
  const n = +$("n2").value;
  const deg = +$("deg2").value;
  const delta = +$("delta2").value;
  $("n2v").textContent = n;
  $("deg2v").textContent = deg;
  $("delta2v").textContent = delta;
  const t0 = performance.now();
  const out = JSON.parse(demo_build_2d(n, +$("seed2").value, deg, delta));
  const ms = performance.now() - t0;
  if (out.error) {
    $("stats2d").textContent = "error: " + out.error;
    return;
  }
  quad = out;
  sel2d = null;
  $("qeps2").value = $("qmode2").value === "abs" ? 4 * delta : 0.01;
  $("stats2d").textContent =
    `points: ${out.n}   leaves: ${out.leaf_count}   depth: ${out.depth}` +
    `   built in ${ms.toFixed(1)} ms (wasm)`;
  $("result2d").textContent = "drag a rectangle over the points to count them";
  $("result2d").className = "result";
  draw2d();
}

function view2d(cv) {
  const lo = { u: 0, v: 0 };
  const hi = { u: 1000, v: 1000 };
  const px = (u) => PAD2 + ((u - lo.u) / (hi.u - lo.u)) * (cv.width - 2 * PAD2);
  const py = (v) => cv.height - PAD2 - ((v - lo.v) / (hi.v - lo.v)) * (cv.height - 2 * PAD2);
  const inv = (x, y) => ({
    u: lo.u + ((x - PAD2) / (cv.width - 2 * PAD2)) * (hi.u - lo.u),
    v: lo.v + ((cv.height - PAD2 - y) / (cv.height - 2 * PAD2)) * (hi.v - lo.v),
  });
  return { px, py, inv };
}

function draw2d() {
  const cv = $("plot2d");
  const ctx = cv.getContext("2d");
  ctx.clearRect(0, 0, cv.width, cv.height);
  if (!quad) return;
  const { px, py } = view2d(cv);

  // leaves shaded by certified error
  for (const leaf of quad.leaves) {
    const t = Math.min(leaf.error / quad.delta, 1);
    ctx.fillStyle = `rgba(228, 87, 46, ${0.05 + 0.25 * t})`;
    const x = px(leaf.u_lo);
    const y = py(leaf.v_hi);
    ctx.fillRect(x, y, px(leaf.u_hi) - x, py(leaf.v_lo) - y);
    ctx.strokeStyle = "#8887";
    ctx.strokeRect(x, y, px(leaf.u_hi) - x, py(leaf.v_lo) - y);
  }

  ctx.fillStyle = "#456a";
  for (const [u, v] of quad.points) ctx.fillRect(px(u) - 1, py(v) - 1, 2, 2);

  if (sel2d) {
    ctx.strokeStyle = "#78f";
    ctx.lineWidth = 2;
    const x = px(Math.min(sel2d.a.u, sel2d.b.u));
    const y = py(Math.max(sel2d.a.v, sel2d.b.v));
    ctx.strokeRect(
      x,
      y,
      px(Math.max(sel2d.a.u, sel2d.b.u)) - x,
      py(Math.min(sel2d.a.v, sel2d.b.v)) - y
    );
    ctx.lineWidth = 1;
  }
}

function query2d() {
  if (!quad || !sel2d) return;
  const l1 = Math.min(sel2d.a.u, sel2d.b.u);
  const u1 = Math.max(sel2d.a.u, sel2d.b.u);
  const l2 = Math.min(sel2d.a.v, sel2d.b.v);
  const u2 = Math.max(sel2d.a.v, sel2d.b.v);
  const out = JSON.parse(demo_query_2d(l1, u1, l2, u2, $("qmode2").value, +$("qeps2").value));
  const box = $("result2d");
  if (out.error) {
    box.textContent = "error: " + out.error;
    box.className = "result refined";
    return;
  }
  box.className = out.refined ? "result refined" : "result";
  box.textContent =
    `count ≈ ${fmt(out.value)}  exact=${out.exact}  |err|=${fmt(out.abs_error)}` +
    `  ${out.refined ? "refined (exact fallback)" : "unrefined"}`;
}

{
  const cv = $("plot2d");
  let dragging = false;
  const point = (ev) => {
    const r = cv.getBoundingClientRect();
    const x = ((ev.clientX - r.left) / r.width) * cv.width;
    const y = ((ev.clientY - r.top) / r.height) * cv.height;
    return view2d(cv).inv(x, y);
  };
  cv.addEventListener("pointerdown", (ev) => {
    dragging = true;
    cv.setPointerCapture(ev.pointerId);
    const p = point(ev);
    sel2d = { a: p, b: p };
    draw2d();
  });
  cv.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    sel2d.b = point(ev);
    draw2d();
  });
  cv.addEventListener("pointerup", () => {
    dragging = false;
    query2d();
  });
}

// ------------------------------------------------------------------- wiring

await init();
for (const id of ["kind", "agg", "n", "deg", "delta", "seed"]) {
  $(id).addEventListener("change", rebuild1d);
}
for (const id of ["n2", "deg2", "delta2", "seed2", "qmode2"]) {
  $(id).addEventListener("change", rebuild2d);
}
rebuild1d();
rebuild2d();
