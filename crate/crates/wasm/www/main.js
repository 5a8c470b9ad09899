import init, { scatteringMap, dopplerCut, localize } from "./pkg/cpcl_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function showValues() {
  for (const input of document.querySelectorAll("input[type=range]")) {
    input.nextElementSibling.textContent = input.value;
  }
}

// dB in [floor, 0] to a grey level
function grey(db, floor) {
  const v = Math.max(0, Math.min(1, 1 - db / floor));
  return Math.round(255 * v);
}

function drawMap() {
  let view;
  try {
    view = scatteringMap(num("mx"), num("my"), num("mvx"), num("mvy"), num("msnr"), $("msparse").checked, 7n);
  } catch (e) {
    $("mapinfo").textContent = String(e);
    return;
  }
  const { rows, cols } = view;
  const db = view.db;
  const canvas = $("map");
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(rows, cols);
  // delay to the right, Doppler upward
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const g = grey(db[r * cols + c], -50);
      const i = 4 * ((cols - 1 - c) * rows + r);
      img.data[i] = img.data[i + 1] = img.data[i + 2] = g;
      img.data[i + 3] = 255;
    }
  }
  const tmp = new OffscreenCanvas(rows, cols);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);

  const dets = view.detections;
  const sx = canvas.width / rows;
  const sy = canvas.height / cols;
  ctx.strokeStyle = "red";
  const lines = [];
  for (let k = 0; k < dets.length; k += 3) {
    const [d, f, snr] = [dets[k], dets[k + 1], dets[k + 2]];
    const y = (cols / 2 - f - 1) * sy;
    ctx.strokeRect(d * sx - 4, y - 4 + sy / 2, sx + 8, sy + 8);
    lines.push(`delay bin ${d} (${(d * view.delayBinM).toFixed(1)} m), ` +
      `Doppler bin ${f} (${(f * view.dopplerBinHz).toFixed(0)} Hz), SNR ${snr.toFixed(1)} dB`);
  }
  $("mapinfo").textContent = `${lines.length} detections\n` + lines.join("\n");
  view.free();
}

function drawCut() {
  const canvas = $("cut");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const floor = -60;
  const toY = (db) => canvas.height * Math.min(1, db / floor);
  ctx.strokeStyle = "#ccc";
  for (let db = 0; db >= floor; db -= 10) {
    ctx.beginPath();
    ctx.moveTo(0, toY(db));
    ctx.lineTo(canvas.width, toY(db));
    ctx.stroke();
  }
  for (const [sparse, colour] of [[false, "black"], [true, "red"]]) {
    const cut = dopplerCut(sparse, num("cdop"), $("chann").checked);
    ctx.strokeStyle = colour;
    ctx.beginPath();
    cut.forEach((db, i) => {
      const x = (i / cut.length) * canvas.width;
      if (i === 0) ctx.moveTo(x, toY(db));
      else ctx.lineTo(x, toY(db));
    });
    ctx.stroke();
  }
}

let target = [120, 170];
const receivers = [[300, 0], [0, 300], [300, 300]];
const world = { min: -250, max: 550 };

function toCanvas(canvas, [x, y]) {
  const s = canvas.width / (world.max - world.min);
  return [(x - world.min) * s, canvas.height - (y - world.min) * s];
}

function drawFix() {
  const canvas = $("fix");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let view;
  try {
    view = localize(target[0], target[1], num("lsig"), Number($("lpairs").value), BigInt(num("lseed")));
  } catch (e) {
    $("fixinfo").textContent = String(e);
    return;
  }
  const pts = view.ellipses;
  const per = 96 * 2;
  const colours = ["#1b9e77", "#d95f02", "#7570b3"];
  for (let e = 0; e * per < pts.length; e++) {
    ctx.strokeStyle = colours[e];
    ctx.beginPath();
    for (let k = 0; k <= 96; k++) {
      const j = e * per + 2 * (k % 96);
      const [x, y] = toCanvas(canvas, [pts[j], pts[j + 1]]);
      if (k === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
  const dot = (p, colour, r) => {
    const [x, y] = toCanvas(canvas, p);
    ctx.fillStyle = colour;
    ctx.beginPath();
    ctx.arc(x, y, r, 0, 2 * Math.PI);
    ctx.fill();
  };
  dot([0, 0], "black", 5);
  receivers.forEach((r) => dot(r, "blue", 5));
  dot(target, "green", 4);
  const c = view.candidates;
  const lines = [];
  for (let k = 0; k < c.length; k += 2) {
    dot([c[k], c[k + 1]], k === 0 ? "red" : "orange", 3);
    lines.push(`(${c[k].toFixed(2)}, ${c[k + 1].toFixed(2)}) m`);
  }
  const err = Math.hypot(c[0] - target[0], c[1] - target[1]);
  $("fixinfo").textContent =
    (lines.length > 1 ? "ambiguous, candidates best first:\n" : "fix: ") + lines.join("\n") +
    `\nerror ${err.toFixed(2)} m, predicted sigma ${view.sigmaM.toFixed(2)} m`;
  view.free();
}

await init();
showValues();
for (const id of ["mx", "my", "mvx", "mvy", "msnr", "msparse"]) {
  $(id).addEventListener("input", () => { showValues(); drawMap(); });
}
for (const id of ["cdop", "chann"]) {
  $(id).addEventListener("input", () => { showValues(); drawCut(); });
}
for (const id of ["lsig", "lpairs", "lseed"]) {
  $(id).addEventListener("input", () => { showValues(); drawFix(); });
}
$("fix").addEventListener("click", (ev) => {
  const canvas = $("fix");
  const rect = canvas.getBoundingClientRect();
  const s = (world.max - world.min) / canvas.width;
  target = [world.min + (ev.clientX - rect.left) * s, world.min + (canvas.height - (ev.clientY - rect.top)) * s];
  drawFix();
});
drawMap();
drawCut();
drawFix();
