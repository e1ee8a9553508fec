/** Browser entry point: wires pointer input, the session client, and the
 * overlay renderer together. Network I/O is event-driven and the canvas is
 * repainted once per animation frame, so a slow reply never blocks drawing.
 */
import { StrokeCapture } from "./capture.js";
import { SessionClient, type Transport } from "./client.js";
import { indicatorColor } from "./overlay.js";

const canvas = document.getElementById("canvas") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusLine = document.getElementById("status")!;
const connectBtn = document.getElementById("connect") as HTMLButtonElement;
const finishBtn = document.getElementById("finish") as HTMLButtonElement;
const clearBtn = document.getElementById("clear") as HTMLButtonElement;
const noiseInput = document.getElementById("noise") as HTMLInputElement;
const resolutionInput = document.getElementById("resolution") as HTMLInputElement;
const seedInput = document.getElementById("seed") as HTMLInputElement;

const DT = 0.1;

let client: SessionClient | null = null;
let capture = new StrokeCapture();
let accumSeconds = 0; // stroke clock, advances only while the pen is down
let penDownAt: number | null = null;
let dirty = true;

function setStatus(text: string): void {
  statusLine.textContent = text;
}

function wsTransport(onOpen: () => void): Transport {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  const socket = new WebSocket(`${scheme}://${location.host}/`);
  socket.onopen = onOpen;
  socket.onmessage = (event) => {
    if (typeof event.data === "string" && client) client.receive(event.data);
  };
  socket.onclose = () => setStatus("disconnected");
  socket.onerror = () => setStatus("connection error");
  return {
    send: (line) => socket.send(line),
    close: () => socket.close(),
  };
}

function connect(): void {
  client?.close();
  capture = new StrokeCapture();
  accumSeconds = 0;
  penDownAt = null;
  const transport = wsTransport(() => {
    client!.configure({
      noise: Number(noiseInput.value),
      resolution: Number(resolutionInput.value),
      seed: Number(seedInput.value),
    });
  });
  client = new SessionClient(transport, {
    onUpdate: (state) => {
      dirty = true;
      if (state.errors.length > 0) setStatus(state.errors[state.errors.length - 1]!);
      else if (state.finalized && state.stats) {
        const mean = state.stats.latency_ms.mean;
        setStatus(
          `done: ${state.stats.n_points} points, ${state.segments.length} segments, ` +
            `mean latency ${mean === null ? "n/a" : mean.toFixed(1)} ms`,
        );
      } else if (state.session) {
        setStatus(`session ${state.session}: draw on the canvas, then press finish`);
      }
    },
  });
  setStatus("connecting...");
}

function strokeTime(eventMs: number): number | null {
  if (penDownAt === null) return null;
  return accumSeconds + (eventMs - penDownAt) / 1000;
}

function canvasUV(event: PointerEvent): { u: number; v: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    u: (event.clientX - rect.left) / rect.width,
    v: (event.clientY - rect.top) / rect.height,
  };
}

function pumpCapture(): void {
  if (!client) return;
  for (const point of capture.drainReady(DT)) client.sendStrokePoint(point);
}

canvas.addEventListener("pointerdown", (event) => {
  if (!client || client.state.finalized) return;
  canvas.setPointerCapture(event.pointerId);
  penDownAt = event.timeStamp;
  const { u, v } = canvasUV(event);
  if (capture.add(strokeTime(event.timeStamp) ?? 0, u, v)) {
    client.state.drawn.push({ u, v });
    dirty = true;
  }
});

canvas.addEventListener("pointermove", (event) => {
  if (!client || penDownAt === null) return;
  const time = strokeTime(event.timeStamp);
  if (time === null) return;
  const { u, v } = canvasUV(event);
  if (capture.add(time, u, v)) {
    client.state.drawn.push({ u, v });
    dirty = true;
  }
  pumpCapture();
});

canvas.addEventListener("pointerup", (event) => {
  const time = strokeTime(event.timeStamp);
  if (time !== null) accumSeconds = time;
  penDownAt = null;
  pumpCapture();
});

finishBtn.addEventListener("click", () => {
  if (!client) return;
  penDownAt = null;
  for (const point of capture.drainFinal(DT)) client.sendStrokePoint(point);
  client.finalize();
});

clearBtn.addEventListener("click", () => {
  connect(); // a fresh connection is a fresh session
});

connectBtn.addEventListener("click", connect);

// -- rendering ---------------------------------------------------------------

function resize(): void {
  const rect = canvas.getBoundingClientRect();
  const dpr = window.devicePixelRatio || 1;
  canvas.width = Math.round(rect.width * dpr);
  canvas.height = Math.round(rect.height * dpr);
  ctx.setTransform(dpr * rect.width, 0, 0, dpr * rect.height, 0, 0);
  dirty = true;
}
window.addEventListener("resize", resize);
resize();

function render(): void {
  requestAnimationFrame(render);
  if (!dirty) return;
  dirty = false;
  ctx.clearRect(0, 0, 1, 1);
  const px = 1 / canvas.getBoundingClientRect().width;

  if (!client) return;
  const state = client.state;

  // the stroke as drawn
  if (state.drawn.length > 1) {
    ctx.beginPath();
    ctx.strokeStyle = "rgba(128,128,128,0.45)";
    ctx.lineWidth = 2 * px;
    state.drawn.forEach((p, i) => (i === 0 ? ctx.moveTo(p.u, p.v) : ctx.lineTo(p.u, p.v)));
    ctx.stroke();
  }

  // reconstructed points, dashed connector across server skips
  const dtGap = DT * 1.5;
  for (let i = 0; i < state.points.length; i++) {
    const p = state.points[i]!;
    if (i > 0) {
      const prev = state.points[i - 1]!;
      ctx.beginPath();
      ctx.strokeStyle = "rgba(60,60,60,0.6)";
      ctx.lineWidth = 1.5 * px;
      ctx.setLineDash(p.t - prev.t > dtGap ? [4 * px, 4 * px] : []);
      ctx.moveTo(prev.u, prev.v);
      ctx.lineTo(p.u, p.v);
      ctx.stroke();
      ctx.setLineDash([]);
    }
    ctx.beginPath();
    ctx.fillStyle = indicatorColor(p.indicator);
    ctx.arc(p.u, p.v, 3.5 * px, 0, 2 * Math.PI);
    ctx.fill();
  }

  // smoothed segments on top
  for (const path of state.smoothPaths) {
    if (!path || path.length < 2) continue;
    ctx.beginPath();
    ctx.strokeStyle = "#15803d";
    ctx.lineWidth = 3 * px;
    path.forEach((p, i) => (i === 0 ? ctx.moveTo(p.u, p.v) : ctx.lineTo(p.u, p.v)));
    ctx.stroke();
  }
}
requestAnimationFrame(render);

setStatus("press connect to start a session");
