/**
 * Wire protocol: newline-delimited JSON frames over a duplex text stream.
 *
 * One object per line. Server to client: snapshot and error frames.
 * Client to server: command frames. Field names and shapes here must
 * stay in lockstep with the service's encoder and decoder.
 */

export interface Snapshot {
  readonly kind: "snapshot";
  readonly iteration: number;
  /** flat (id, x, y) triples */
  readonly circles: readonly number[];
  readonly radius: number;
  readonly density: number;
  readonly overlapCircle: number;
  readonly overlapDepth: number;
  readonly converged: boolean;
}

export interface DragStart {
  readonly kind: "drag_start";
  readonly id: number;
}

export interface DragMove {
  readonly kind: "drag_move";
  readonly id: number;
  readonly x: number;
  readonly y: number;
}

export interface DragEnd {
  readonly kind: "drag_end";
  readonly id: number;
}

export interface Vacancy {
  readonly kind: "vacancy";
  readonly x: number;
  readonly y: number;
}

export interface Pause {
  readonly kind: "pause";
}

export interface Resume {
  readonly kind: "resume";
}

export interface SetParam {
  readonly kind: "set_param";
  readonly key: string;
  readonly value: number;
}

export interface ErrorFrame {
  readonly kind: "error";
  readonly message: string;
  readonly offset: number | null;
}

export type Command = DragStart | DragMove | DragEnd | Vacancy | Pause | Resume | SetParam;
export type Frame = Snapshot | Command | ErrorFrame;

export class DecodeError extends Error {
  readonly offset: number | null;

  constructor(message: string, offset: number | null = null) {
    super(message);
    this.name = "DecodeError";
    this.offset = offset;
  }
}

/** Encode one frame as a newline-terminated JSON line. */
export function encodeFrame(frame: Frame): string {
  let obj: Record<string, unknown>;
  switch (frame.kind) {
    case "snapshot":
      obj = {
        type: "snapshot",
        iteration: frame.iteration,
        circles: frame.circles,
        radius: frame.radius,
        density: frame.density,
        max_overlap: { circle: frame.overlapCircle, depth: frame.overlapDepth },
        converged: frame.converged,
      };
      break;
    case "drag_start":
      obj = { type: "command", cmd: "drag_start", id: frame.id };
      break;
    case "drag_move":
      obj = { type: "command", cmd: "drag_move", id: frame.id, x: frame.x, y: frame.y };
      break;
    case "drag_end":
      obj = { type: "command", cmd: "drag_end", id: frame.id };
      break;
    case "vacancy":
      obj = { type: "command", cmd: "vacancy", x: frame.x, y: frame.y };
      break;
    case "pause":
      obj = { type: "command", cmd: "pause" };
      break;
    case "resume":
      obj = { type: "command", cmd: "resume" };
      break;
    case "set_param":
      obj = { type: "command", cmd: "set_param", key: frame.key, value: frame.value };
      break;
    case "error":
      obj = { type: "error", message: frame.message, offset: frame.offset };
      break;
  }
  return JSON.stringify(obj) + "\n";
}

function need(obj: Record<string, unknown>, key: string, offset: number | null): unknown {
  if (!(key in obj)) {
    throw new DecodeError(`frame missing '${key}'`, offset);
  }
  return obj[key];
}

// JSON has no integer type, so "int" means an integral, boolean-free number
function needInt(obj: Record<string, unknown>, key: string, offset: number | null): number {
  const val = need(obj, key, offset);
  if (typeof val !== "number" || !Number.isInteger(val)) {
    throw new DecodeError(`frame field '${key}' has wrong type`, offset);
  }
  return val;
}

function needNumber(obj: Record<string, unknown>, key: string, offset: number | null): number {
  const val = need(obj, key, offset);
  if (typeof val !== "number" || Number.isNaN(val)) {
    throw new DecodeError(`frame field '${key}' has wrong type`, offset);
  }
  return val;
}

function needString(obj: Record<string, unknown>, key: string, offset: number | null): string {
  const val = need(obj, key, offset);
  if (typeof val !== "string") {
    throw new DecodeError(`frame field '${key}' has wrong type`, offset);
  }
  return val;
}

function needCoord(obj: Record<string, unknown>, key: string, offset: number | null): number {
  const val = needNumber(obj, key, offset);
  if (!(val >= 0 && val <= 1)) {
    throw new DecodeError(`coordinate '${key}' outside [0, 1]`, offset);
  }
  return val;
}

/** Decode one line (without its newline); offset locates it in the stream. */
export function decodeLine(line: string, offset: number | null = null): Frame {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch (exc) {
    throw new DecodeError(`bad JSON: ${(exc as Error).message}`, offset);
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new DecodeError("frame is not an object", offset);
  }
  const obj = parsed as Record<string, unknown>;
  const ftype = needString(obj, "type", offset);
  if (ftype === "snapshot") {
    const ov = need(obj, "max_overlap", offset);
    if (typeof ov !== "object" || ov === null || Array.isArray(ov)) {
      throw new DecodeError("frame field 'max_overlap' has wrong type", offset);
    }
    const rawCircles = need(obj, "circles", offset);
    if (!Array.isArray(rawCircles)) {
      throw new DecodeError("frame field 'circles' has wrong type", offset);
    }
    if (rawCircles.length % 3 !== 0) {
      throw new DecodeError("snapshot circles not (id, x, y) triples", offset);
    }
    const circles: number[] = [];
    for (const v of rawCircles) {
      if (typeof v !== "number" || Number.isNaN(v)) {
        throw new DecodeError("snapshot circles entry is not a number", offset);
      }
      circles.push(v);
    }
    const converged = need(obj, "converged", offset);
    if (typeof converged !== "boolean") {
      throw new DecodeError("frame field 'converged' has wrong type", offset);
    }
    return {
      kind: "snapshot",
      iteration: needInt(obj, "iteration", offset),
      circles,
      radius: needNumber(obj, "radius", offset),
      density: needNumber(obj, "density", offset),
      overlapCircle: needInt(ov as Record<string, unknown>, "circle", offset),
      overlapDepth: needNumber(ov as Record<string, unknown>, "depth", offset),
      converged,
    };
  }
  if (ftype === "error") {
    const off = obj["offset"];
    if (off !== undefined && off !== null && (typeof off !== "number" || !Number.isInteger(off))) {
      throw new DecodeError("frame field 'offset' has wrong type", offset);
    }
    return {
      kind: "error",
      message: needString(obj, "message", offset),
      offset: off === undefined || off === null ? null : off,
    };
  }
  if (ftype !== "command") {
    throw new DecodeError(`unknown frame type '${ftype}'`, offset);
  }
  const cmd = needString(obj, "cmd", offset);
  switch (cmd) {
    case "drag_start":
      return { kind: "drag_start", id: needInt(obj, "id", offset) };
    case "drag_move":
      return {
        kind: "drag_move",
        id: needInt(obj, "id", offset),
        x: needCoord(obj, "x", offset),
        y: needCoord(obj, "y", offset),
      };
    case "drag_end":
      return { kind: "drag_end", id: needInt(obj, "id", offset) };
    case "vacancy":
      return { kind: "vacancy", x: needCoord(obj, "x", offset), y: needCoord(obj, "y", offset) };
    case "pause":
      return { kind: "pause" };
    case "resume":
      return { kind: "resume" };
    case "set_param":
      return {
        kind: "set_param",
        key: needString(obj, "key", offset),
        value: needNumber(obj, "value", offset),
      };
    default:
      throw new DecodeError(`unknown command '${cmd}'`, offset);
  }
}

export type DecodedItem = { frame: Frame; error: null } | { frame: null; error: DecodeError };

const utf8 = new TextEncoder();

/**
 * Splits an incoming text stream into frames, tracking absolute byte
 * offsets for error reporting. A bad line yields an error item and the
 * stream keeps going; a partial line stays buffered until its newline
 * arrives.
 */
export class LineDecoder {
  private buffer = "";
  private consumed = 0;

  feed(chunk: string): DecodedItem[] {
    this.buffer += chunk;
    const out: DecodedItem[] = [];
    for (;;) {
      const nl = this.buffer.indexOf("\n");
      if (nl < 0) {
        return out;
      }
      const line = this.buffer.slice(0, nl);
      this.buffer = this.buffer.slice(nl + 1);
      const at = this.consumed;
      this.consumed += utf8.encode(line).length + 1;
      if (line.trim() === "") {
        continue;
      }
      try {
        out.push({ frame: decodeLine(line, at), error: null });
      } catch (exc) {
        if (exc instanceof DecodeError) {
          out.push({ frame: null, error: exc });
        } else {
          throw exc;
        }
      }
    }
  }

  /** Call when the stream closes; a dangling partial line is an error. */
  end(): DecodeError | null {
    if (this.buffer.trim() === "") {
      return null;
    }
    const err = new DecodeError("stream ended mid-frame", this.consumed);
    this.buffer = "";
    return err;
  }
}
