import init, { counterexample, block_map, AttackDemo } from "./pkg/lazyattack_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function counterexampleView() {
  const v = counterexample(num("cx-w1"), num("cx-w2"), num("cx-x1"), num("cx-x2"), num("cx-eps"));
  const f = (x) => x.toFixed(4);
  $("cx-out").innerHTML = `
    <table>
      <tr><th>S</th><th>∅</th><th>{1}</th><th>{2}</th><th>{1,2}</th></tr>
      <tr><th>F(S)</th><td>${f(v[0])}</td><td>${f(v[1])}</td><td>${f(v[2])}</td><td>${f(v[3])}</td></tr>
    </table>
    <p>Δ(2 | ∅) = ${f(v[4])}, Δ(2 | {1}) = ${f(v[5])}, λ(V, 2) = ${f(v[6])} —
    <span class="${v[7] ? "good" : "bad"}">${v[7] ? "submodular" : "not submodular"}</span></p>`;
}

// Distinct-ish colour per block id.
const hue = (id) => (id * 137.508) % 360;

function gridView() {
  const side = Math.max(1, Math.min(64, num("grid-side")));
  const out = $("grid-canvases");
  out.innerHTML = "";
  for (let k = Number($("grid-k").value); k >= 1; k = Math.floor(k / 2)) {
    const ids = block_map(side, side, k);
    const c = document.createElement("canvas");
    c.width = c.height = side;
    c.style.width = c.style.height = "120px";
    c.title = `block size ${k}`;
    const ctx = c.getContext("2d");
    for (let i = 0; i < ids.length; i++) {
      ctx.fillStyle = `hsl(${hue(ids[i])} 60% ${ids[i] % 2 ? 45 : 65}%)`;
      ctx.fillRect(i % side, Math.floor(i / side), 1, 1);
    }
    out.appendChild(c);
    if (k === 1) break;
  }
}

function paint(canvas, w, h, values, colour) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(w, h);
  for (let i = 0; i < w * h; i++) {
    const [r, g, b] = colour(values[i]);
    img.data.set([r, g, b, 255], 4 * i);
  }
  const tmp = new OffscreenCanvas(w, h);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

const grey = (v) => { const g = Math.round(255 * v); return [g, g, g]; };
const signed = (s) => (s > 0 ? [220, 60, 60] : s < 0 ? [60, 90, 220] : [200, 200, 200]);

let demo = null;

function attackView() {
  if (!demo) return;
  const rounds = num("at-rounds");
  $("at-rounds-v").textContent = rounds;
  const s = demo.run(rounds);
  const w = demo.width(), h = demo.height();
  paint($("at-image"), w, h, demo.image(), grey);
  paint($("at-noise"), w, h, s.noise_sign(), signed);
  paint($("at-adv"), w, h, s.adversarial(), grey);
  const values = s.values();
  $("at-out").innerHTML = `
    <p>label ${demo.label()}${$("at-targeted").checked ? `, target ${demo.target()}` : ""};
    prediction after attack <b>${s.predicted()}</b> —
    <span class="${s.success() ? "good" : "bad"}">${s.success() ? "fooled" : "not fooled"}</span></p>
    <p>${s.queries()} queries, ${s.rounds()} rounds, final block size ${s.block_size()}${s.finished() ? " (stopped)" : ""};
    objective ${values.length ? values[values.length - 1].toFixed(4) : "–"}</p>`;
  s.free();
}

function train() {
  if (demo) demo.free();
  demo = new AttackDemo(num("at-seed"), num("at-eps"), Number($("at-k").value), num("at-budget"), $("at-targeted").checked);
  attackView();
}

await init();
for (const id of ["cx-w1", "cx-w2", "cx-x1", "cx-x2", "cx-eps"]) $(id).addEventListener("input", counterexampleView);
for (const id of ["grid-side", "grid-k"]) $(id).addEventListener("input", gridView);
$("at-train").addEventListener("click", train);
$("at-rounds").addEventListener("input", attackView);
counterexampleView();
gridView();
train();
