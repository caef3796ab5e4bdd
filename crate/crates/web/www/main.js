import init, { convolve_demo, feedback_demo, budget_demo } from "./pkg/upconv_web.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 50;
  ctx.clearRect(0, 0, w, h);
  let lo = Infinity, hi = -Infinity, len = 0;
  for (const s of series) {
    for (const v of s.data) { if (v < lo) lo = v; if (v > hi) hi = v; }
    len = Math.max(len, s.data.length);
  }
  if (opts.symmetric) { const m = Math.max(Math.abs(lo), Math.abs(hi)); lo = -m; hi = m; }
  if (!(hi > lo)) { hi = lo + 1; }
  const x = (i) => pad + (i / Math.max(1, len - 1)) * (w - 2 * pad);
  const y = (v) => h - pad - ((v - lo) / (hi - lo)) * (h - 2 * pad);

  ctx.strokeStyle = "#ccc"; ctx.lineWidth = 1; ctx.fillStyle = "#666"; ctx.font = "22px system-ui";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillText(hi.toPrecision(3) + (opts.unit || ""), 4, pad + 6);
  ctx.fillText(lo.toPrecision(3) + (opts.unit || ""), 4, h - pad + 6);
  if (opts.xlabel) ctx.fillText(opts.xlabel, w / 2 - 40, h - 10);

  for (const s of series) {
    ctx.strokeStyle = s.color; ctx.lineWidth = s.width || 2; ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    // Decimate long traces to roughly one min/max pair per pixel column.
    const step = Math.max(1, Math.floor(s.data.length / (w - 2 * pad)));
    for (let i = 0; i < s.data.length; i += step) {
      let a = s.data[i], b = s.data[i];
      for (let j = i; j < Math.min(i + step, s.data.length); j++) { a = Math.min(a, s.data[j]); b = Math.max(b, s.data[j]); }
      if (i === 0) ctx.moveTo(x(i), y(a)); else ctx.lineTo(x(i), y(a));
      if (b !== a) ctx.lineTo(x(i), y(b));
    }
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function bindLabel(id, fmt) {
  const el = $(id), out = $(id + "-v");
  const show = () => { out.textContent = fmt(Number(el.value)); };
  el.addEventListener("input", show);
  show();
}

function runConv() {
  const block = Number($("conv-block").value);
  const len = Number($("conv-len").value);
  const rt = Number($("conv-rt").value);
  const seed = Number($("conv-seed").value) >>> 0;
  const t0 = performance.now();
  const view = convolve_demo(block, len, rt, seed);
  const ms = performance.now() - t0;
  plot($("conv-plot"), [
    { data: view.input(), color: "#999", width: 1 },
    { data: view.reference(), color: "#ff7f0e", width: 4 },
    { data: view.output(), color: "#1f77b4", width: 1.5, dash: [6, 4] },
  ], { symmetric: true, xlabel: "sample" });
  $("conv-stats").textContent =
    `${view.partitions} partitions x ${block}-sample blocks, ${view.blocks} blocks streamed; ` +
    `max |partitioned - direct| = ${view.max_error.toExponential(2)}; computed in ${ms.toFixed(1)} ms`;
  view.free();
}

function runLoop() {
  const gain = Number($("loop-gain").value) / 100;
  const est = Number($("loop-est").value) / 100;
  const blocks = Number($("loop-blocks").value);
  const view = feedback_demo(gain, est, blocks, 7);
  const mic = view.mic_db(), cond = view.conditioned_db(), src = view.source_db();
  view.free();
  plot($("loop-plot"), [
    { data: src, color: "#999", width: 2 },
    { data: cond, color: "#2ca02c", width: 3 },
    { data: mic, color: "#d62728", width: 2 },
  ], { unit: " dB", xlabel: "block" });
  const last = blocks - 1;
  $("loop-stats").textContent =
    `last block: microphone ${mic[last].toFixed(1)} dB, cancelled input ${cond[last].toFixed(1)} dB, ` +
    `clean source ${src[last].toFixed(1)} dB (residual loop gain ${(gain * (1 - est)).toFixed(2)})`;
}

function runBudget() {
  const seconds = Number($("bud-len").value) / 10;
  const rate = Number($("bud-rate").value);
  const flat = budget_demo(seconds, rate);
  const rows = [];
  for (let i = 0; i < flat.length; i += 3) {
    const [n, ms, k] = [flat[i], flat[i + 1], flat[i + 2]];
    rows.push(`<tr><td>${n}</td><td>${ms.toFixed(3)}</td><td>${k}</td><td>${(k * (n + 1)).toLocaleString()}</td></tr>`);
  }
  $("bud-table").tBodies[0].innerHTML = rows.join("");
}

await init();
$("status").textContent = "";
bindLabel("conv-len", (v) => v);
bindLabel("conv-rt", (v) => v);
bindLabel("loop-gain", (v) => (v / 100).toFixed(2));
bindLabel("loop-est", (v) => (v / 100).toFixed(2));
bindLabel("loop-blocks", (v) => v);
bindLabel("bud-len", (v) => (v / 10).toFixed(1));
for (const id of ["conv-block", "conv-len", "conv-rt", "conv-seed"]) $(id).addEventListener("change", runConv);
for (const id of ["loop-gain", "loop-est", "loop-blocks"]) $(id).addEventListener("input", runLoop);
for (const id of ["bud-len", "bud-rate"]) $(id).addEventListener("input", runBudget);
runConv();
runLoop();
runBudget();
