import init, { partition_graph, soften, train_curves } from "./pkg/sdss_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

function report(id, text, isError = false) {
  $(id).textContent = text;
  $(id).className = isError ? "out err" : "out";
}

function call(fn, outId) {
  try {
    return JSON.parse(fn());
  } catch (e) {
    report(outId, String(e), true);
    return null;
  }
}

// nodes of one part sit on an arc; fill colour is the part, ring colour the planted block
function drawPartition(v) {
  const c = $("p-canvas").getContext("2d");
  const { width: w, height: h } = c.canvas;
  c.clearRect(0, 0, w, h);
  const k = v.part_sizes.length;
  const slot = new Array(k).fill(0);
  const pos = v.parts.map((p) => {
    const i = slot[p]++;
    const cx = ((p + 0.5) * w) / k;
    const r = Math.min(w / k, h) * 0.38;
    const a = (2 * Math.PI * i) / Math.max(1, v.part_sizes[p]);
    return [cx + r * Math.cos(a), h / 2 + r * Math.sin(a)];
  });
  c.lineWidth = 0.6;
  for (const [a, b] of v.edges) {
    c.strokeStyle = v.parts[a] === v.parts[b] ? "rgba(0,0,0,0.15)" : "rgba(200,0,0,0.55)";
    c.beginPath();
    c.moveTo(...pos[a]);
    c.lineTo(...pos[b]);
    c.stroke();
  }
  pos.forEach(([x, y], i) => {
    c.beginPath();
    c.arc(x, y, 5, 0, 2 * Math.PI);
    c.fillStyle = palette[v.parts[i] % palette.length];
    c.fill();
    c.lineWidth = 2;
    c.strokeStyle = palette[(v.blocks[i] + 4) % palette.length];
    c.stroke();
  });
}

function runPartition() {
  const v = call(
    () => partition_graph(num("p-blocks"), num("p-per"), num("p-in"), num("p-out"), num("p-k"), num("p-eps"), num("p-seed")),
    "p-out",
  );
  if (!v) return;
  drawPartition(v);
  report(
    "p-out",
    `nodes ${v.n}  edges ${v.edges.length}  cut ${v.initial_cut} -> ${v.cut}  ` +
      `part sizes [${v.part_sizes.join(", ")}]  cap ${v.size_cap}`,
  );
}

function bars(c, x0, w, h, probs, color, title) {
  c.fillStyle = "#222";
  c.fillText(title, x0, 14);
  const bw = w / probs.length;
  probs.forEach((p, i) => {
    c.fillStyle = color;
    c.fillRect(x0 + i * bw + 4, h - 20 - p * (h - 50), bw - 8, p * (h - 50));
    c.fillStyle = "#222";
    c.fillText(p.toFixed(3), x0 + i * bw + 6, h - 6);
  });
}

function runSoften() {
  $("s-tau-v").textContent = $("s-tau").value;
  const parse = (id) => $(id).value.split(",").map((s) => Number(s.trim()));
  const v = call(() => soften(parse("s-t"), parse("s-s"), num("s-y"), num("s-tau"), num("s-b")), "s-out");
  if (!v) return;
  const c = $("s-canvas").getContext("2d");
  const { width: w, height: h } = c.canvas;
  c.clearRect(0, 0, w, h);
  c.font = "12px system-ui";
  bars(c, 0, w / 3 - 10, h, v.teacher, palette[0], "teacher softmax(z/τ)");
  bars(c, w / 3, w / 3 - 10, h, v.student, palette[1], "student softmax(z/τ)");
  bars(c, (2 * w) / 3, w / 3 - 10, h, v.student_hard, palette[2], "student softmax(z)");
  report(
    "s-out",
    `KL(teacher || student) ${v.kl.toFixed(5)}   mixed loss ${v.loss.toFixed(5)}\n` +
      `gradient w.r.t. student logits [${v.grad.map((g) => g.toFixed(4)).join(", ")}]`,
  );
}

function drawCurves(v) {
  const c = $("c-canvas").getContext("2d");
  const { width: w, height: h } = c.canvas;
  c.clearRect(0, 0, w, h);
  const series = [["teacher", v.teacher, palette[0]]];
  if (v.student) series.push(["student", v.student, palette[3]]);
  const epochs = Math.max(...series.map(([, s]) => s.length), 1);
  const maxLoss = Math.max(...series.flatMap(([, s]) => s.map((p) => p.loss)), 1e-9);
  const x = (e) => 40 + (e / epochs) * (w - 60);
  const y = (t) => h - 25 - t * (h - 45);
  c.strokeStyle = "#999";
  c.strokeRect(40, 20, w - 60, h - 45);
  c.font = "12px system-ui";
  series.forEach(([name, s, color], k) => {
    for (const [key, dash, scale] of [["val_acc", [], 1], ["loss", [4, 3], maxLoss]]) {
      c.setLineDash(dash);
      c.strokeStyle = color;
      c.beginPath();
      s.forEach((p, i) => (i ? c.lineTo : c.moveTo).call(c, x(p.epoch), y(p[key] / scale)));
      c.stroke();
    }
    c.setLineDash([]);
    c.fillStyle = color;
    c.fillText(`${name}: solid = val accuracy, dashed = loss / ${maxLoss.toFixed(2)}`, 50 + k * 420, 14);
  });
}

function runCurves() {
  report("c-out", "training...");
  setTimeout(() => {
    const v = call(
      () => train_curves($("c-mode").value, $("c-task").value, num("c-shift"), num("c-epochs"), num("c-seed")),
      "c-out",
    );
    if (!v) return;
    drawCurves(v);
    const t = `teacher test accuracy ${(100 * v.teacher_test_acc).toFixed(1)}%`;
    report("c-out", v.student ? `${t}   student test accuracy ${(100 * v.test_acc).toFixed(1)}%` : t);
  }, 10);
}

await init();
$("p-run").onclick = runPartition;
for (const id of ["s-t", "s-s", "s-y", "s-b", "s-tau"]) $(id).oninput = runSoften;
$("c-run").onclick = runCurves;
runPartition();
runSoften();
