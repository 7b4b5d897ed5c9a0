import init, { catalogue, throughput, cdf, classify } from "./pkg/rrbsight_wasm.js";

const UL = "#d9480f";
const DL = "#1c7ed6";
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function setupCanvas(canvas) {
  const ratio = window.devicePixelRatio || 1;
  const w = canvas.clientWidth;
  const h = canvas.clientHeight;
  canvas.width = w * ratio;
  canvas.height = h * ratio;
  const ctx = canvas.getContext("2d");
  ctx.scale(ratio, ratio);
  ctx.clearRect(0, 0, w, h);
  return { ctx, w, h };
}

// Plots [[x, y], ...] series on shared axes. `step` draws a staircase.
function plot(canvas, series, { step = false, yLabel = "" } = {}) {
  const { ctx, w, h } = setupCanvas(canvas);
  const pad = { l: 56, r: 10, t: 10, b: 24 };
  const all = series.flatMap((s) => s.points);
  if (all.length === 0) return;
  const xs = all.map((p) => p[0]);
  const ys = all.map((p) => p[1]);
  const x0 = Math.min(...xs), x1 = Math.max(...xs) || 1;
  const y0 = Math.min(0, ...ys), y1 = Math.max(...ys) || 1;
  const sx = (x) => pad.l + ((x - x0) / (x1 - x0 || 1)) * (w - pad.l - pad.r);
  const sy = (y) => h - pad.b - ((y - y0) / (y1 - y0 || 1)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#555";
  ctx.font = "11px system-ui, sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad.l, pad.t);
  ctx.lineTo(pad.l, h - pad.b);
  ctx.lineTo(w - pad.r, h - pad.b);
  ctx.stroke();
  for (const v of [y0, (y0 + y1) / 2, y1]) {
    ctx.fillText(fmt(v), 4, sy(v) + 4);
  }
  ctx.fillText(fmt(x0), pad.l, h - 6);
  ctx.fillText(fmt(x1), w - pad.r - 40, h - 6);
  if (yLabel) ctx.fillText(yLabel, pad.l + 6, pad.t + 10);

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.points.forEach(([x, y], i) => {
      if (i === 0) {
        ctx.moveTo(sx(x), sy(step ? 0 : y));
        if (step) ctx.lineTo(sx(x), sy(y));
      } else if (step) {
        ctx.lineTo(sx(x), sy(s.points[i - 1][1]));
        ctx.lineTo(sx(x), sy(y));
      } else {
        ctx.lineTo(sx(x), sy(y));
      }
    });
    ctx.stroke();
  }
}

function fmt(v) {
  const a = Math.abs(v);
  if (a >= 1e6) return (v / 1e6).toFixed(1) + "M";
  if (a >= 1e3) return (v / 1e3).toFixed(1) + "k";
  return Number.isInteger(v) ? String(v) : v.toFixed(2);
}

function guarded(fn, errorTarget) {
  return () => {
    errorTarget.textContent = "";
    errorTarget.classList.remove("err");
    try {
      fn();
    } catch (e) {
      errorTarget.textContent = String(e.message || e);
      errorTarget.classList.add("err");
    }
  };
}

function drawThroughput() {
  const r = JSON.parse(throughput($("tp-class").value, BigInt(num("tp-seed")), num("tp-dur"), num("tp-bin"), num("tp-by")));
  const norm = $("tp-norm").checked;
  const ul = norm ? r.ul_norm : r.ul_raw;
  const dl = norm ? r.dl_norm : r.dl_raw;
  const t = (i) => (i * r.bin_ms) / 1000;
  plot($("tp-canvas"), [
    { color: UL, points: ul.map((v, i) => [t(i), v]) },
    { color: DL, points: dl.map((v, i) => [t(i), v]) },
  ], { yLabel: norm ? "normalised" : "bytes per bin" });
  $("tp-info").textContent = `C-RNTI ${r.crnti}, ${ul.length} bins, x in seconds${r.partial_last_bin ? ", last bin partial" : ""}`;
}

function drawCdf() {
  const r = JSON.parse(cdf($("cdf-class").value, BigInt(num("cdf-seed")), 30000, 100, $("cdf-norm").checked));
  plot($("cdf-canvas"), [
    { color: UL, points: r.ul },
    { color: DL, points: r.dl },
  ], { step: true, yLabel: "P(X <= x)" });
}

function runClassifier() {
  const out = $("cl-out");
  out.textContent = "Training...";
  // Yield so the message paints before the synchronous work starts.
  setTimeout(guarded(() => {
    const t0 = performance.now();
    const r = JSON.parse(classify(BigInt(num("cl-seed")), num("cl-n"), num("cl-dur"), num("cl-trees")));
    const secs = ((performance.now() - t0) / 1000).toFixed(1);
    const rows = r.random_forest.classes.map((c, i) => {
      const e = r.extra_trees.classes[i];
      return `<tr><td>${c.label}</td><td>${c.f1.toFixed(3)}</td><td>${e.f1.toFixed(3)}</td><td>${c.support}</td></tr>`;
    });
    out.innerHTML =
      `<p>${r.traces} traces, ${secs}s. Random Forest accuracy <b>${r.random_forest.accuracy.toFixed(3)}</b> ` +
      `(macro F1 ${r.random_forest.macro_f1.toFixed(3)}), Extra Trees accuracy <b>${r.extra_trees.accuracy.toFixed(3)}</b> ` +
      `(macro F1 ${r.extra_trees.macro_f1.toFixed(3)}).</p>` +
      `<table><tr><th>class</th><th>RF F1</th><th>ET F1</th><th>test rows</th></tr>${rows.join("")}</table>`;
  }, out), 20);
}

async function main() {
  await init();
  const classes = JSON.parse(catalogue());
  for (const id of ["tp-class", "cdf-class"]) {
    const sel = $(id);
    for (const c of classes) {
      const o = document.createElement("option");
      o.value = c.label;
      o.textContent = `${c.label} (${c.shape}, ${c.qos})`;
      sel.appendChild(o);
    }
  }
  $("cdf-class").value = "ott-netflix";
  $("tp-go").onclick = guarded(drawThroughput, $("tp-info"));
  $("cdf-go").onclick = guarded(drawCdf, $("status"));
  $("cl-go").onclick = runClassifier;
  $("status").textContent = "";
  guarded(drawThroughput, $("tp-info"))();
  guarded(drawCdf, $("status"))();
}

main().catch((e) => {
  $("status").textContent = `Failed to load: ${e}`;
  $("status").classList.add("err");
});
