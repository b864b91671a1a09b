import init, {
  scenario_size, scenario_rgba, explain_scenario, deletion_curves, rise_mask,
} from "./pkg/cwox_web.js";

const $ = (id) => document.getElementById(id);

function paint(canvas, size, rgba) {
  canvas.width = size;
  canvas.height = size;
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), size, size), 0, 0);
}

function figure(title, size, rgba) {
  const fig = document.createElement("figure");
  const canvas = document.createElement("canvas");
  paint(canvas, size, rgba);
  const cap = document.createElement("figcaption");
  cap.textContent = title;
  fig.append(canvas, cap);
  return fig;
}

function settings() {
  return { masks: Number($("masks").value), seed: Number($("seed").value) };
}

function runExplain() {
  const { masks, seed } = settings();
  const out = JSON.parse(explain_scenario($("method").value, masks, seed));
  $("top").textContent = "top-K: " + out.top.map((t) => `${t.label} ${t.probability.toFixed(3)}`).join(", ")
    + " | partition: " + out.partition.map((c) => `{${c.join(", ")}}`).join(" ");
  const row = $("maps");
  row.replaceChildren(...out.maps.map((m) => figure(m.title, m.width, m.rgba)));
}

function runCurves() {
  const { masks, seed } = settings();
  const cmp = JSON.parse(deletion_curves($("label").value, masks, seed));
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const colors = ["#d62728", "#1f77b4"];
  const n = cmp.scores[0].n;
  const top = Math.max(...cmp.scores.flatMap((s) => s.curve));
  cmp.scores.forEach((s, i) => {
    ctx.strokeStyle = colors[i];
    ctx.beginPath();
    s.curve.forEach((v, r) => {
      const x = (r / n) * canvas.width;
      const y = canvas.height - (v / top) * (canvas.height - 10);
      r === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
  });
  $("scores").textContent = `${cmp.label} vs {${cmp.foil.join(", ")}}, shared n_delta ${cmp.shared_n_delta}\n`
    + cmp.scores.map((s, i) =>
      `${s.method.padEnd(8)} (${i ? "blue" : "red"})  CAUC ${s.cauc.toExponential(3)}  CDROP ${s.cdrop.toFixed(4)}  n_delta ${s.n_delta}`,
    ).join("\n");
}

function runMask() {
  const size = scenario_size();
  const rgba = rise_mask(Number($("seed").value), Number($("index").value), Number($("grid").value), Number($("keep").value));
  paint($("mask"), size, rgba);
}

await init();
paint($("input"), scenario_size(), scenario_rgba());
$("run").onclick = runExplain;
$("curves").onclick = runCurves;
for (const id of ["index", "grid", "keep"]) $(id).oninput = runMask;
runMask();
runExplain();
