import init, { SplatDemo, absmax_errors, kmeans_scatter } from "./pkg/gscodec_web.js";

const $ = (id) => document.getElementById(id);

function blit(canvas, rgba, w, h) {
  canvas.width = w;
  canvas.height = h;
  canvas.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
}

function setupSplat() {
  const demo = new SplatDemo(48, 100, 160, 400, 7n);
  blit($("target"), demo.target_rgba(), demo.width(), demo.height());
  const update = () => {
    const step = Number($("k").value);
    const k = step === 0 ? 0 : 2 ** step;
    $("k-out").textContent = k === 0 ? "unquantized" : k;
    blit($("render"), demo.render_quantized(k), demo.width(), demo.height());
    const p = demo.psnr();
    $("psnr").textContent = Number.isFinite(p) ? p.toFixed(2) : "inf";
    $("count").textContent = demo.count();
  };
  $("k").addEventListener("input", update);
  update();
}

function setupBitq() {
  const n = 120;
  const colors = ["#d62728", "#2ca02c", "#1f77b4"];
  const draw = () => {
    const out = absmax_errors(n, BigInt($("bq-seed").value || 0));
    const ctx = $("bitq").getContext("2d");
    const { width: W, height: H } = ctx.canvas;
    ctx.clearRect(0, 0, W, H);
    const mid = H / 2;
    const yScale = (H / 2 - 10) / 0.15;
    ctx.strokeStyle = "#999";
    ctx.beginPath(); ctx.moveTo(0, mid); ctx.lineTo(W, mid); ctx.stroke();
    const lines = [];
    for (let b = 0; b < 3; b++) {
      const [worst, bound] = [out[4 * n + 2 * b], out[4 * n + 2 * b + 1]];
      ctx.strokeStyle = colors[b];
      ctx.setLineDash([]);
      ctx.beginPath();
      for (let i = 0; i < n; i++) {
        const err = out[(b + 1) * n + i] - out[i];
        const x = (i + 0.5) * W / n;
        i === 0 ? ctx.moveTo(x, mid - err * yScale) : ctx.lineTo(x, mid - err * yScale);
      }
      ctx.stroke();
      ctx.setLineDash([4, 4]);
      for (const s of [1, -1]) {
        ctx.beginPath(); ctx.moveTo(0, mid - s * bound * yScale); ctx.lineTo(W, mid - s * bound * yScale); ctx.stroke();
      }
      lines.push(`${[4, 8, 16][b]}-bit: max error ${worst.toExponential(3)}, bound ${bound.toExponential(3)}`);
    }
    $("bitq-stats").textContent = lines.join("\n");
  };
  $("bq-seed").addEventListener("input", draw);
  draw();
}

function setupKmeans() {
  const n = 600;
  const draw = () => {
    const k = Number($("km-k").value);
    const iters = Number($("km-it").value);
    $("km-k-out").textContent = k;
    $("km-it-out").textContent = iters;
    const out = kmeans_scatter(n, k, iters, 3n);
    const ctx = $("kmeans").getContext("2d");
    const { width: W, height: H } = ctx.canvas;
    ctx.clearRect(0, 0, W, H);
    for (let i = 0; i < n; i++) {
      ctx.fillStyle = `hsl(${(out[3 * i + 2] * 137.5) % 360} 65% 50%)`;
      ctx.fillRect(out[3 * i] * W - 2, out[3 * i + 1] * H - 2, 4, 4);
    }
    ctx.fillStyle = "#000";
    for (let j = 3 * n; j < out.length; j += 2) {
      ctx.beginPath(); ctx.arc(out[j] * W, out[j + 1] * H, 6, 0, 2 * Math.PI); ctx.fill();
    }
  };
  $("km-k").addEventListener("input", draw);
  $("km-it").addEventListener("input", draw);
  draw();
}

await init();
setupSplat();
setupBitq();
setupKmeans();
