/**
 * Browser entry point. Query params pick the service (?host=..&port=..);
 * the transport layer is a text WebSocket carrying the wire frames.
 */

import { SteerClient, webSocketTransport } from "./client.js";
import { InputBinding } from "./input.js";
import { render } from "./render.js";
import { ViewState } from "./state.js";

function start(): void {
  const params = new URLSearchParams(window.location.search);
  const host = params.get("host") ?? window.location.hostname ?? "127.0.0.1";
  const port = params.get("port") ?? "7870";

  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    throw new Error("canvas 2d context unavailable");
  }

  const state = new ViewState(window.innerWidth, window.innerHeight);
  const client = new SteerClient(webSocketTransport(`ws://${host}:${port}/`), {
    onFrame: (frame) => state.apply(frame),
    onOpen: () => {
      state.connection = "open";
    },
    onClose: () => {
      state.connection = "closed";
    },
  });
  const input = new InputBinding(state, client, canvas);

  const resize = (): void => {
    canvas.width = window.innerWidth;
    canvas.height = window.innerHeight;
  };
  resize();
  window.addEventListener("resize", resize);

  canvas.addEventListener("pointerdown", (ev) => input.pointerDown(ev));
  canvas.addEventListener("pointermove", (ev) => input.pointerMove(ev));
  canvas.addEventListener("pointerup", (ev) => input.pointerUp(ev));
  canvas.addEventListener("pointercancel", (ev) => input.pointerCancel(ev));
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    input.wheel(ev.clientX, ev.clientY, ev.deltaY);
  });
  window.addEventListener("keydown", (ev) => {
    if (ev.code === "Space") {
      ev.preventDefault();
    }
    input.key(ev.code);
  });

  const frame = (): void => {
    render(ctx, state, canvas.width, canvas.height, performance.now());
    window.requestAnimationFrame(frame);
  };
  window.requestAnimationFrame(frame);
}

start();
