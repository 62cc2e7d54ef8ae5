import init, { analytic_point, rd_curve, simulate_cascade } from "./pkg/causal_rdf_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const fmt = (x) => Number.isFinite(x) ? x.toPrecision(8) : String(x);

function table(rows) {
  return "<table>" + rows.map(([k, v]) => `<tr><th>${k}</th><td>${v}</td></tr>`).join("") + "</table>";
}

function guard(outId, f) {
  try {
    f();
  } catch (err) {
    $(outId).innerHTML = `<p class="error">${err}</p>`;
  }
}

function runAnalytic() {
  guard("analytic-out", () => {
    const [alpha, beta, gamma, dmax, rate] = analytic_point(num("p"), num("q"), num("d"));
    $("analytic-out").innerHTML = table([
      ["alpha", fmt(alpha)], ["beta", fmt(beta)], ["gamma", fmt(gamma)],
      ["D_max", fmt(dmax)], ["R(D)", fmt(rate)],
    ]);
  });
}

function drawCurve(triples) {
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 48;
  ctx.clearRect(0, 0, w, h);
  const pts = [];
  for (let i = 0; i < triples.length; i += 3) pts.push(triples.slice(i, i + 3));
  const dMax = Math.max(...pts.map((t) => t[0]));
  const rMax = Math.max(1e-9, ...pts.map((t) => Math.max(t[1], t[2])));
  const x = (d) => pad + (w - 2 * pad) * d / dMax;
  const y = (r) => h - pad - (h - 2 * pad) * r / rMax;

  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, pad); ctx.lineTo(pad, h - pad); ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.font = "12px system-ui";
  ctx.fillText("D", w - pad + 8, h - pad + 4);
  ctx.fillText("R (bits)", 4, pad - 10);
  ctx.fillText(fmt(dMax), w - pad - 30, h - pad + 18);
  ctx.fillText(fmt(rMax), 4, pad + 4);

  ctx.strokeStyle = "#1f77b4";
  ctx.beginPath();
  pts.forEach(([d, , rc], i) => (i ? ctx.lineTo(x(d), y(rc)) : ctx.moveTo(x(d), y(rc))));
  ctx.stroke();

  ctx.fillStyle = "#d62728";
  for (const [d, r] of pts) {
    ctx.beginPath();
    ctx.arc(x(d), y(r), 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function runCurve() {
  guard("curve-out", () => {
    const t0 = performance.now();
    const triples = rd_curve(num("p"), num("q"), num("points"));
    drawCurve(triples);
    let worst = 0;
    for (let i = 0; i < triples.length; i += 3) worst = Math.max(worst, Math.abs(triples[i + 1] - triples[i + 2]));
    $("curve-out").innerHTML =
      `<p>Dots: solver. Line: closed form. Largest gap ${worst.toExponential(2)} bits, ` +
      `${(performance.now() - t0).toFixed(0)} ms.</p>`;
  });
}

function runSimulation() {
  guard("sim-out", () => {
    const [dTarget, dEmp, se, g, gEmp] = simulate_cascade(num("p"), num("q"), num("d"), num("steps"), num("seed"));
    $("sim-out").innerHTML = table([
      ["target D", fmt(dTarget)],
      ["empirical D", `${fmt(dEmp)} &plusmn; ${fmt(se)}`],
      ["deviation (SE)", se > 0 ? fmt((dEmp - dTarget) / se) : "n/a"],
      ["target P(y=0)", fmt(g)],
      ["empirical P(y=0)", fmt(gEmp)],
    ]);
  });
}

await init();
$("analytic-run").addEventListener("click", runAnalytic);
$("curve-run").addEventListener("click", runCurve);
$("sim-run").addEventListener("click", runSimulation);
runAnalytic();
runCurve();
