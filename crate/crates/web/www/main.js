import init, { dispersion, kinetic, trajectory } from "./pkg/lattice_kinetic_web.js";

const N = 256;
const $ = (id) => document.getElementById(id);

// splits [k..., a..., b...] into three equal columns
function columns(flat) {
  const n = flat.length / 3;
  return [flat.slice(0, n), flat.slice(n, 2 * n), flat.slice(2 * n)];
}

function plot(canvas, xs, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const v of s.ys) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  lo = Math.min(lo, 0);
  if (hi - lo < 1e-12) hi = lo + 1;
  const x = (v) => pad + ((v - xs[0]) / (xs[xs.length - 1] - xs[0])) * (w - 2 * pad);
  const y = (v) => h - pad - ((v - lo) / (hi - lo)) * (h - 2 * pad);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.fillText(hi.toPrecision(3), 2, pad + 4);
  ctx.fillText(lo.toPrecision(3), 2, h - pad);
  ctx.fillText("k = " + xs[0].toFixed(2), pad, h - 8);
  ctx.fillText(xs[xs.length - 1].toFixed(2), w - pad - 24, h - 8);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.ys.forEach((v, i) => (i ? ctx.lineTo(x(xs[i]), y(v)) : ctx.moveTo(x(xs[i]), y(v))));
    ctx.stroke();
  }
}

function guarded(errId, f) {
  return () => {
    $(errId).textContent = "";
    try { f(); } catch (e) { $(errId).textContent = String(e.message ?? e); }
  };
}

const drawDispersion = guarded("d-err", () => {
  const [k, omega, beta] = columns(dispersion(Number($("d-omega0").value), N));
  plot($("d-plot"), k, [{ ys: omega, color: "#1f77b4" }, { ys: beta, color: "#d62728" }]);
});

const drawKinetic = guarded("k-err", () => {
  const t = Number($("k-t").value);
  $("k-tval").textContent = t.toFixed(1);
  const [k, e0, et] = columns(kinetic(Number($("k-amp").value), t, N));
  plot($("k-plot"), k, [{ ys: e0, color: "#999" }, { ys: et, color: "#1f77b4" }]);
});

const drawTrajectory = guarded("t-err", () => {
  const [k, s0, st] = columns(
    trajectory(Number($("t-center").value), Number($("t-eps").value), Number($("t-t").value), N, Number($("t-seed").value) >>> 0)
  );
  const scale = (v) => Array.from(v, (x) => x / N);
  plot($("t-plot"), k, [{ ys: scale(s0), color: "#999" }, { ys: scale(st), color: "#d62728" }]);
});

await init();
$("status").textContent = "";
$("d-run").addEventListener("click", drawDispersion);
$("k-t").addEventListener("input", drawKinetic);
$("k-amp").addEventListener("change", drawKinetic);
$("t-run").addEventListener("click", drawTrajectory);
drawDispersion();
drawKinetic();
drawTrajectory();
