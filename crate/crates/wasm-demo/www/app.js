import init, { sample, canonical, fit_points } from "./pkg/sqkit_wasm.js";

const canvas = document.getElementById("view");
const ctx = canvas.getContext("2d");
const info = document.getElementById("info");
const ids = ["eps1", "eps2", "ax", "ay", "az", "noise", "visible"];

let yaw = 0.6;
let pitch = -0.4;
let layers = {};

function value(id) {
  return parseFloat(document.getElementById(id).value);
}

function shape() {
  return [value("eps1"), value("eps2"), value("ax"), value("ay"), value("az")];
}

// Orthographic view: yaw about z, then pitch about x. Returns screen x, y
// and depth.
function project(x, y, z) {
  const cy = Math.cos(yaw), sy = Math.sin(yaw);
  const cp = Math.cos(pitch), sp = Math.sin(pitch);
  const x1 = cy * x - sy * y;
  const y1 = sy * x + cy * y;
  const y2 = cp * y1 - sp * z;
  const z2 = sp * y1 + cp * z;
  const s = canvas.width / 0.6;
  return [canvas.width / 2 + s * x1, canvas.height / 2 - s * z2, y2];
}

function draw() {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (const [name, color, size] of [
    ["surface", "#3367d6", 1.5],
    ["canonical", "#e37400", 1.5],
    ["fit", "#1e8e3e", 1.5],
    ["scan", "#222", 2],
  ]) {
    const pts = layers[name];
    if (!pts) continue;
    ctx.fillStyle = color;
    for (let i = 0; i < pts.length; i += 3) {
      const [u, v] = project(pts[i], pts[i + 1], pts[i + 2]);
      ctx.fillRect(u - size / 2, v - size / 2, size, size);
    }
  }
}

function report(fn) {
  try {
    fn();
  } catch (e) {
    info.textContent = "error: " + (e.message ?? e);
  }
  draw();
}

function refresh() {
  for (const id of ids) {
    const input = document.getElementById(id);
    input.nextElementSibling.textContent = input.value;
  }
  report(() => {
    layers = { surface: sample(...shape(), 3000, 0, 1, 0) };
    info.textContent = "eps = (" + value("eps1") + ", " + value("eps2") + ")";
  });
}

function showCanonical() {
  report(() => {
    const c = canonical(...shape(), 3000);
    layers.canonical = c.points;
    const m = Array.from(c.matrix, (v) => v.toFixed(4));
    info.textContent =
      (c.warped ? "folded into the eps2 <= 1 range\n" : "already in the eps2 <= 1 range\n") +
      "eps = (" + c.eps1.toFixed(3) + ", " + c.eps2.toFixed(3) + ")\nM =\n" +
      [0, 3, 6].map((r) => "  " + m.slice(r, r + 3).join("  ")).join("\n");
    c.free();
  });
}

// Fitted parameters as a point layer: sample the fitted shape at the origin,
// then rotate and translate it with the returned pose.
function posed(p) {
  const pts = sample(p[0], p[1], p[2], p[3], p[4], 3000, 0, 1, 0);
  const [w, x, y, z] = [p[5], p[6], p[7], p[8]];
  const r = [
    1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
    2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
    2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
  ];
  for (let i = 0; i < pts.length; i += 3) {
    const [a, b, c] = [pts[i], pts[i + 1], pts[i + 2]];
    for (let k = 0; k < 3; k++) {
      pts[i + k] = r[3 * k] * a + r[3 * k + 1] * b + r[3 * k + 2] * c + p[9 + k];
    }
  }
  return pts;
}

function fitScan() {
  info.textContent = "fitting...";
  // let the status text paint before the solver blocks the thread
  setTimeout(() => report(() => {
    const seed = Math.floor(Math.random() * 1e9);
    const scan = sample(...shape(), 1500, value("noise"), value("visible"), seed);
    const t0 = performance.now();
    const p = fit_points(scan);
    layers.scan = scan;
    layers.fit = posed(p);
    const f = (v) => v.toFixed(3);
    info.textContent =
      "fit in " + (performance.now() - t0).toFixed(0) + " ms\n" +
      "eps = (" + f(p[0]) + ", " + f(p[1]) + ")\n" +
      "scale = (" + f(p[2]) + ", " + f(p[3]) + ", " + f(p[4]) + ") m\n" +
      "rms residual = " + (1000 * p[12]).toFixed(2) + " mm";
  }), 10);
}

let drag = null;
canvas.addEventListener("pointerdown", (e) => {
  drag = [e.clientX, e.clientY];
  canvas.setPointerCapture(e.pointerId);
});
canvas.addEventListener("pointermove", (e) => {
  if (!drag) return;
  yaw += (e.clientX - drag[0]) * 0.01;
  pitch += (e.clientY - drag[1]) * 0.01;
  drag = [e.clientX, e.clientY];
  draw();
});
canvas.addEventListener("pointerup", () => (drag = null));

await init();
for (const id of ids) document.getElementById(id).addEventListener("input", refresh);
document.getElementById("canon").addEventListener("click", showCanonical);
document.getElementById("fit").addEventListener("click", fitScan);
refresh();
