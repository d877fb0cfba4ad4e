import init, { synth_and_process, process_trace_csv, window_spectra } from "./pkg/facepulse_wasm.js";

const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };
const fail = (msg) => { $("error").textContent = msg; };

const state = { result: null, uploaded: null, timer: null };

function params() {
  const mod = $("mod").value;
  const motion = $("motion").value;
  return {
    duration_s: Number($("dur").value),
    bpm: Number($("bpm").value),
    rr_jitter_ms: Number($("jitter").value),
    modulation_freq_hz: mod ? Number(mod) : null,
    modulation_depth_ms: Number($("depth").value),
    motion_freq_hz: motion ? Number(motion) : null,
    motion_amp_rel: Number($("mamp").value) / 100,
    snr_db: Number($("snr").value),
    motion_suppression: $("suppress").checked,
    seed: Number($("seed").value),
  };
}

function refreshLabels() {
  $("bpm_v").textContent = `${$("bpm").value} bpm`;
  $("jitter_v").textContent = `${$("jitter").value} ms`;
  $("depth_v").textContent = `${$("depth").value} ms`;
  $("snr_v").textContent = `${$("snr").value} dB`;
  $("mamp_v").textContent = `${$("mamp").value}% of pulse`;
  $("spec_t_v").textContent = `${$("spec_t").value} s`;
}

// ── canvas helpers ──────────────────────────────────────────────────────────

function frame(canvas) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const m = { l: 70, r: 16, t: 14, b: 34 };
  return { ctx, w, h, m, pw: w - m.l - m.r, ph: h - m.t - m.b };
}

function axes(f, x0, x1, y0, y1, xlab, ylab) {
  const { ctx, m, pw, ph } = f;
  ctx.strokeStyle = "#d6dde4";
  ctx.fillStyle = "#5b6b7a";
  ctx.font = "20px system-ui";
  ctx.lineWidth = 1;
  ctx.strokeRect(m.l, m.t, pw, ph);
  const xticks = 6, yticks = 4;
  for (let i = 0; i <= xticks; i++) {
    const vx = x0 + (x1 - x0) * i / xticks;
    const px = m.l + pw * i / xticks;
    ctx.fillText(vx.toFixed(Math.abs(x1 - x0) > 20 ? 0 : 1), px - 10, m.t + ph + 24);
  }
  for (let i = 0; i <= yticks; i++) {
    const vy = y0 + (y1 - y0) * i / yticks;
    const py = m.t + ph - ph * i / yticks;
    ctx.fillText(vy.toFixed(Math.abs(y1 - y0) > 20 ? 0 : 2), 6, py + 6);
  }
  ctx.fillText(xlab, m.l + pw / 2 - 20, f.h - 6);
  ctx.save(); ctx.translate(16, m.t + ph / 2 + 20); ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylab, 0, 0); ctx.restore();
  f.sx = (x) => m.l + (x - x0) / (x1 - x0) * pw;
  f.sy = (y) => m.t + ph - (y - y0) / (y1 - y0) * ph;
}

function polyline(f, xs, ys, color, width = 2) {
  const { ctx } = f;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  let started = false;
  for (let i = 0; i < xs.length; i++) {
    if (!Number.isFinite(ys[i])) { started = false; continue; }
    const px = f.sx(xs[i]), py = f.sy(ys[i]);
    if (started) ctx.lineTo(px, py); else { ctx.moveTo(px, py); started = true; }
  }
  ctx.stroke();
}

function ticks(f, xs, yFrac0, yFrac1, color) {
  const { ctx, m, ph } = f;
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  for (const x of xs) {
    const px = f.sx(x);
    ctx.beginPath();
    ctx.moveTo(px, m.t + ph * yFrac0);
    ctx.lineTo(px, m.t + ph * yFrac1);
    ctx.stroke();
  }
}

// ── plots ───────────────────────────────────────────────────────────────────

function drawBvp(r) {
  const f = frame($("bvp"));
  if (!r.bvp || r.bvp.length === 0) { axes(f, 0, 1, -1, 1, "time (s)", "BVP"); return; }
  const xs = r.bvp_t_ms.map((t) => t / 1000);
  const lo = Math.min(...r.bvp), hi = Math.max(...r.bvp);
  const pad = 0.1 * (hi - lo || 1);
  axes(f, xs[0], xs[xs.length - 1], lo - pad, hi + pad, "time (s)", "BVP (normalized)");
  polyline(f, xs, r.bvp, "#1c2733", 1.6);
  if (r.truth_beats_ms) ticks(f, r.truth_beats_ms.map((t) => t / 1000), 0.0, 0.1, "#2471a3");
  ticks(f, r.beats_ms.map((t) => t / 1000), 0.9, 1.0, "#c0392b");
}

function stepSeries(series) {
  const xs = [], ys = [];
  for (const w of series) {
    xs.push(w.t_start_ms / 1000, w.t_end_ms / 1000, NaN);
    ys.push(w.bpm, w.bpm, NaN);
  }
  return { xs, ys };
}

function drawHr(r) {
  const f = frame($("hr"));
  const all = [...(r.hr_series || []), ...(r.truth_hr_series || [])].map((w) => w.bpm)
    .concat((r.f0_history || []).map(([, f0]) => f0 * 60));
  if (all.length === 0) { axes(f, 0, 1, 40, 200, "time (s)", "bpm"); return; }
  const tEnd = Math.max(
    ...(r.hr_series || []).map((w) => w.t_end_ms / 1000),
    ...(r.truth_hr_series || []).map((w) => w.t_end_ms / 1000),
    1);
  const lo = Math.min(...all) - 8, hi = Math.max(...all) + 8;
  axes(f, 0, tEnd, lo, hi, "time (s)", "bpm");
  if (r.f0_history && r.f0_history.length) {
    polyline(f, r.f0_history.map(([t]) => t / 1000), r.f0_history.map(([, f0]) => f0 * 60), "#9996", 1);
  }
  if (r.truth_hr_series) {
    const t = stepSeries(r.truth_hr_series);
    polyline(f, t.xs, t.ys, "#2471a3", 2.5);
  }
  const p = stepSeries(r.hr_series || []);
  polyline(f, p.xs, p.ys, "#c0392b", 2.5);
}

function drawSpectra(s) {
  const f = frame($("spec"));
  if (s.error) { axes(f, 0, 5, 0, 1, "frequency (Hz)", "|X|"); return; }
  const fmax = 5.0;
  const n = s.freqs_hz.findIndex((v) => v > fmax);
  const cut = (a) => (n < 0 ? a : a.slice(0, n));
  const freqs = cut(s.freqs_hz);
  const hi = Math.max(...cut(s.raw_rppg), ...cut(s.motion_scaled), 1e-9) * 1.05;
  axes(f, 0, fmax, 0, hi, "frequency (Hz)", "|X|");
  const { ctx } = f;
  ctx.fillStyle = "#2471a308";
  ctx.fillRect(f.sx(s.band_low_hz), f.m.t, f.sx(s.band_high_hz) - f.sx(s.band_low_hz), f.ph);
  polyline(f, freqs, cut(s.raw_rppg), "#1c2733", 1.6);
  polyline(f, freqs, cut(s.motion_scaled), "#c59f27", 1.6);
  polyline(f, freqs, cut(s.suppressed_banded), "#c0392b", 2.2);
  if (s.f0_hz != null) {
    ctx.fillStyle = "#c0392b";
    const px = f.sx(s.f0_hz);
    ctx.beginPath();
    ctx.moveTo(px, f.m.t + 12); ctx.lineTo(px - 7, f.m.t); ctx.lineTo(px + 7, f.m.t);
    ctx.fill();
  }
}

function metric(label, value) {
  return `<div class="metric"><b>${value}</b><span>${label}</span></div>`;
}

function fmt(x, digits = 2, unit = "") {
  return x == null ? "—" : `${x.toFixed(digits)}${unit}`;
}

function drawMetrics(r) {
  const d = r.diagnostics || {};
  const parts = [
    metric("HR MAE vs truth", fmt(r.mae_bpm, 2, " bpm")),
    metric("RMSSD (est / true)", `${fmt(r.hrv?.rmssd_ms, 1)} / ${fmt(r.truth_rmssd_ms, 1)} ms`),
    metric("LF / HF (n.u.)", `${fmt(r.hrv?.lf_nu, 2)} / ${fmt(r.hrv?.hf_nu, 2)}`),
    metric("beats detected", r.beats_ms ? r.beats_ms.length : 0),
    metric("windows (no-lock)", `${d.windows_emitted ?? 0} (${d.windows_no_lock ?? 0})`),
  ];
  $("metrics").innerHTML = parts.join("");
}

// ── wiring ──────────────────────────────────────────────────────────────────

function runSynthetic() {
  refreshLabels();
  const t0 = performance.now();
  const out = JSON.parse(synth_and_process(JSON.stringify(params())));
  if (out.error) { fail(out.error); return; }
  fail("");
  state.result = out;
  state.uploaded = null;
  $("back").hidden = true;
  drawMetrics(out);
  drawBvp(out);
  drawHr(out);
  runSpectra();
  status(`synthetic scenario processed in ${(performance.now() - t0).toFixed(0)} ms — ` +
    `${out.diagnostics.frames_in} frames, ${out.diagnostics.windows_emitted} windows`);
}

function runSpectra() {
  if (state.uploaded) return;
  const s = JSON.parse(window_spectra(JSON.stringify(params()), Number($("spec_t").value) * 1000));
  drawSpectra(s);
  if (!s.error) $("spec_t_v").textContent = `${(s.t_start_ms / 1000).toFixed(1)} s`;
}

function runUpload(text, name) {
  const t0 = performance.now();
  const out = JSON.parse(process_trace_csv(text, ""));
  if (out.error) { fail(`${name}: ${out.error}`); return; }
  fail("");
  state.uploaded = out;
  $("back").hidden = false;
  const r = {
    bvp_t_ms: (out.bvp || []).map((p) => p.t_ms),
    bvp: (out.bvp || []).map((p) => p.value),
    beats_ms: out.beats_ms,
    hr_series: out.hr_series,
    hrv: out.hrv,
    diagnostics: out.diagnostics,
  };
  drawMetrics(r);
  drawBvp(r);
  drawHr(r);
  const f = frame($("spec"));
  axes(f, 0, 5, 0, 1, "frequency (Hz)", "|X|");
  status(`${name}: ${out.diagnostics.frames_in} frames processed in ${(performance.now() - t0).toFixed(0)} ms`);
}

function schedule() {
  clearTimeout(state.timer);
  state.timer = setTimeout(runSynthetic, 120);
}

await init();
status("ready");
for (const id of ["bpm", "jitter", "mod", "depth", "snr", "motion", "mamp", "suppress", "dur", "seed"]) {
  $(id).addEventListener("input", schedule);
}
$("spec_t").addEventListener("input", () => { refreshLabels(); runSpectra(); });
$("file").addEventListener("change", async (e) => {
  const file = e.target.files[0];
  if (file) runUpload(await file.text(), file.name);
});
$("back").addEventListener("click", runSynthetic);
runSynthetic();
