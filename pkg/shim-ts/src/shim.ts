/**
 * Instrumentation client emitting tracegraph/1 trace files.
 *
 * Mirrors the core recorder semantics exactly: deterministic ids (s0/s1...,
 * o0/o1..., sanitized identity keys for variables), a logical clock ticking on
 * operation boundaries and variable versions, in-place updates as version
 * chains, and re-versioning of link destinations that do not strictly postdate
 * their sources. Canonical export is byte-identical to the core toolkit's, so
 * traces recorded here can be compared, validated and explored by it.
 */

import { writeFileSync } from "node:fs";

export type Snapshot = string | Record<string, string>;
export type VarRef = readonly [string, number];

export class StateError extends Error {}
export class ConfigError extends Error {}

export interface VarConfig {
  category?: string;
  comment?: string;
  metadata?: Record<string, string>;
  identity?: string; // default "by-render"
  renderer?: string; // default "text"
}

export type TupleEndpoint = readonly [Snapshot, VarConfig];
export type Endpoint = VarRef | TupleEndpoint;

export type IdentityFn = (value: Snapshot, rendered: string) => string;

interface VariableVersion {
  version: number;
  ts: number;
  value: string;
  comment: string;
  metadata: Record<string, string>;
}

interface VariableChain {
  varId: string;
  identityKey: string;
  category: string;
  versions: VariableVersion[];
}

interface OperationRecord {
  opId: string;
  sessionId: string;
  name: string;
  category: string;
  comment: string;
  metadata: Record<string, string>;
  tsStart: number;
  tsEnd: number;
}

interface Session {
  sessionId: string;
  label: string;
  comment: string;
  metadata: Record<string, string>;
  memberOperationIds: string[];
}

interface DependencyEdge {
  src: VarRef;
  dst: VarRef;
  opId: string;
  comment: string;
  metadata: Record<string, string>;
}

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

export function fnv1a64(text: string): bigint {
  let h = FNV_OFFSET;
  for (const byte of Buffer.from(text, "utf-8")) {
    h = ((h ^ BigInt(byte)) * FNV_PRIME) & MASK64;
  }
  return h;
}

function sortedKeys(obj: Record<string, string>): string[] {
  // Code-unit sort; keys are expected to stay within the BMP (ASCII in practice)
  // so this matches the core toolkit's code-point ordering.
  return Object.keys(obj).sort();
}

function renderKv(value: Snapshot): string {
  if (typeof value !== "object" || value === null) {
    throw new ConfigError("kv renderer requires a mapping snapshot");
  }
  return sortedKeys(value)
    .map((k) => {
      const v = value[k];
      if (typeof v !== "string") {
        throw new ConfigError(`kv renderer requires string values (field '${k}')`);
      }
      return `${k}=${v}`;
    })
    .join("\n");
}

function render(name: string, value: Snapshot): string {
  if (name === "text") {
    if (typeof value !== "string") {
      throw new ConfigError("text renderer requires a string snapshot");
    }
    return value;
  }
  if (name === "kv") {
    return renderKv(value);
  }
  if (name.startsWith("field:")) {
    const field = name.slice("field:".length);
    if (typeof value !== "object" || value === null || !(field in value)) {
      throw new ConfigError(`field renderer: snapshot has no field '${field}'`);
    }
    const out = value[field];
    if (typeof out !== "string") {
      throw new ConfigError(`field renderer: field '${field}' is not a string`);
    }
    return out;
  }
  throw new ConfigError(`unknown renderer '${name}'`);
}

function builtinIdentity(name: string): IdentityFn | null {
  if (name === "by-render") {
    return (_value, text) => `fnv1a64:${fnv1a64(text).toString(16).padStart(16, "0")}`;
  }
  const resolved = name === "mem0-dict" ? "by-field:id" : name;
  if (resolved.startsWith("by-field:")) {
    const field = resolved.slice("by-field:".length);
    return (_value, text) => {
      for (const line of text.split("\n")) {
        if (line.startsWith(field + "=")) {
          return line.slice(field.length + 1);
        }
      }
      throw new ConfigError(`identity by-field:${field}: rendering has no ${field}= line`);
    };
  }
  return null;
}

const ID_UNSAFE = /[^A-Za-z0-9_.-]/g;

export class ShimContext {
  private graphId: string;
  private metadata: Record<string, string>;
  private sessions: Session[] = [];
  private operations: Map<string, OperationRecord> = new Map();
  private variables: Map<string, VariableChain> = new Map();
  private edges: DependencyEdge[] = [];
  private clock = 0;
  private activeSession: Session | null = null;
  private activeOp: OperationRecord | null = null;
  private strategies: Map<string, IdentityFn> = new Map();
  private keyToVar: Map<string, string> = new Map();
  private finished = false;
  private sessionCount = 0;
  private opCount = 0;

  constructor(graphId = "trace", metadata: Record<string, string> = {}) {
    this.graphId = graphId;
    this.metadata = { ...metadata };
  }

  private tick(): number {
    return this.clock++;
  }

  private checkOpen(): void {
    if (this.finished) {
      throw new StateError("context already finished; graph is sealed");
    }
  }

  beginSession(label: string, comment = "", metadata: Record<string, string> = {}): string {
    this.checkOpen();
    if (this.activeOp !== null) {
      throw new StateError("cannot begin a session while an operation is active");
    }
    const sessionId = `s${this.sessionCount++}`;
    const session: Session = {
      sessionId,
      label,
      comment,
      metadata: { ...metadata },
      memberOperationIds: [],
    };
    this.sessions.push(session);
    this.activeSession = session;
    return sessionId;
  }

  endSession(): void {
    this.checkOpen();
    if (this.activeSession === null) {
      throw new StateError("no active session to end");
    }
    if (this.activeOp !== null) {
      throw new StateError("cannot end a session while an operation is active");
    }
    this.activeSession = null;
  }

  beginOperation(name: string, category = "", comment = "",
                 metadata: Record<string, string> = {}): string {
    this.checkOpen();
    if (this.activeSession === null) {
      throw new StateError("beginOperation requires an active session");
    }
    if (this.activeOp !== null) {
      throw new StateError("operations do not nest; end the active operation first");
    }
    const opId = `o${this.opCount++}`;
    const op: OperationRecord = {
      opId,
      sessionId: this.activeSession.sessionId,
      name,
      category,
      comment,
      metadata: { ...metadata },
      tsStart: this.tick(),
      tsEnd: 0,
    };
    this.operations.set(opId, op);
    this.activeSession.memberOperationIds.push(opId);
    this.activeOp = op;
    return opId;
  }

  endOperation(): void {
    this.checkOpen();
    if (this.activeOp === null) {
      throw new StateError("no active operation to end");
    }
    this.activeOp.tsEnd = this.tick();
    this.activeOp = null;
  }

  registerIdentity(name: string, fn: IdentityFn): void {
    this.checkOpen();
    if (this.strategies.has(name) || builtinIdentity(name) !== null) {
      throw new ConfigError(`identity strategy '${name}' is already registered`);
    }
    this.strategies.set(name, fn);
  }

  private strategy(name: string): IdentityFn {
    const custom = this.strategies.get(name);
    if (custom !== undefined) {
      return custom;
    }
    const builtin = builtinIdentity(name);
    if (builtin === null) {
      throw new ConfigError(`unregistered identity strategy '${name}'`);
    }
    return builtin;
  }

  private varIdForKey(key: string): string {
    const base = key.replace(ID_UNSAFE, "_") || "v";
    let candidate = base;
    let n = 1;
    while (this.variables.has(candidate)) {
      n += 1;
      candidate = `${base}_${n}`;
    }
    return candidate;
  }

  commentVariable(snapshot: Snapshot, config: VarConfig = {}): VarRef {
    this.checkOpen();
    const text = render(config.renderer ?? "text", snapshot);
    const key = this.strategy(config.identity ?? "by-render")(snapshot, text);
    let varId = this.keyToVar.get(key);
    if (varId === undefined) {
      varId = this.varIdForKey(key);
      this.keyToVar.set(key, varId);
      this.variables.set(varId, {
        varId,
        identityKey: key,
        category: config.category ?? "",
        versions: [],
      });
    }
    const chain = this.variables.get(varId)!;
    const version: VariableVersion = {
      version: chain.versions.length,
      ts: this.tick(),
      value: text,
      comment: config.comment ?? "",
      metadata: { ...(config.metadata ?? {}) },
    };
    chain.versions.push(version);
    return [varId, version.version];
  }

  private versionOf(ref: VarRef): VariableVersion {
    const chain = this.variables.get(ref[0]);
    const version = chain?.versions.find((v) => v.version === ref[1]);
    if (version === undefined) {
      throw new ConfigError(`unknown variable handle ${ref[0]}#${ref[1]}`);
    }
    return version;
  }

  private materialize(endpoint: Endpoint): VarRef {
    if (Array.isArray(endpoint) && endpoint.length === 2 &&
        typeof endpoint[0] === "string" && typeof endpoint[1] === "number") {
      const ref = endpoint as VarRef;
      this.versionOf(ref);
      return ref;
    }
    if (Array.isArray(endpoint) && endpoint.length === 2) {
      const [snapshot, config] = endpoint as TupleEndpoint;
      return this.commentVariable(snapshot, config);
    }
    throw new ConfigError("endpoint must be a [varId, version] handle or a [snapshot, config] pair");
  }

  private reversion(ref: VarRef): VarRef {
    const chain = this.variables.get(ref[0])!;
    const old = this.versionOf(ref);
    const version: VariableVersion = {
      version: chain.versions.length,
      ts: this.tick(),
      value: old.value,
      comment: old.comment,
      metadata: { ...old.metadata },
    };
    chain.versions.push(version);
    return [chain.varId, version.version];
  }

  commentLink(source: Endpoint, target: Endpoint, comment = "",
              metadata: Record<string, string> = {}): { src: VarRef; dst: VarRef; opId: string } {
    this.checkOpen();
    if (this.activeOp === null) {
      throw new StateError("commentLink requires an active operation");
    }
    const src = this.materialize(source);
    let dst = this.materialize(target);
    if (this.versionOf(dst).ts <= this.versionOf(src).ts) {
      dst = this.reversion(dst);
    }
    const edge: DependencyEdge = {
      src,
      dst,
      opId: this.activeOp.opId,
      comment,
      metadata: { ...metadata },
    };
    this.edges.push(edge);
    return { src: edge.src, dst: edge.dst, opId: edge.opId };
  }

  /** Seal the context and return the canonical trace document bytes. */
  finish(path?: string): Buffer {
    this.checkOpen();
    if (this.activeOp !== null) {
      throw new StateError("cannot finish while an operation is active");
    }
    this.activeSession = null;
    this.finished = true;
    const data = Buffer.from(this.canonicalJson(), "utf-8");
    if (path !== undefined) {
      writeFileSync(path, data);
    }
    return data;
  }

  private canonicalJson(): string {
    const meta = (m: Record<string, string>): Record<string, string> => {
      const out: Record<string, string> = {};
      for (const k of sortedKeys(m)) {
        out[k] = m[k];
      }
      return out;
    };
    const versionTs = (ref: VarRef): number => this.versionOf(ref).ts;

    const sessions = [...this.sessions].sort((a, b) => {
      const ta = Math.min(...a.memberOperationIds
        .filter((m) => this.operations.has(m))
        .map((m) => this.operations.get(m)!.tsStart), Infinity);
      const tb = Math.min(...b.memberOperationIds
        .filter((m) => this.operations.has(m))
        .map((m) => this.operations.get(m)!.tsStart), Infinity);
      if (ta !== tb) return ta - tb;
      return a.sessionId < b.sessionId ? -1 : a.sessionId > b.sessionId ? 1 : 0;
    });
    const operations = [...this.operations.values()].sort((a, b) => {
      if (a.tsStart !== b.tsStart) return a.tsStart - b.tsStart;
      return a.opId < b.opId ? -1 : a.opId > b.opId ? 1 : 0;
    });
    const variables = [...this.variables.values()].sort((a, b) => {
      const ta = a.versions.length ? a.versions[0].ts : Infinity;
      const tb = b.versions.length ? b.versions[0].ts : Infinity;
      if (ta !== tb) return ta - tb;
      return a.varId < b.varId ? -1 : a.varId > b.varId ? 1 : 0;
    });
    const edges = [...this.edges].sort((a, b) => {
      const byTs = versionTs(a.dst) - versionTs(b.dst) || versionTs(a.src) - versionTs(b.src);
      if (byTs !== 0) return byTs;
      if (a.opId !== b.opId) return a.opId < b.opId ? -1 : 1;
      return a.comment < b.comment ? -1 : a.comment > b.comment ? 1 : 0;
    });

    const doc = {
      format_version: "tracegraph/1",
      graph_id: this.graphId,
      metadata: meta(this.metadata),
      sessions: sessions.map((s) => ({
        session_id: s.sessionId,
        label: s.label,
        comment: s.comment,
        metadata: meta(s.metadata),
        member_operation_ids: s.memberOperationIds,
      })),
      operations: operations.map((o) => ({
        op_id: o.opId,
        session_id: o.sessionId,
        name: o.name,
        category: o.category,
        comment: o.comment,
        metadata: meta(o.metadata),
        ts_start: o.tsStart,
        ts_end: o.tsEnd,
      })),
      variables: variables.map((c) => ({
        var_id: c.varId,
        identity_key: c.identityKey,
        category: c.category,
        versions: c.versions.map((v) => ({
          version: v.version,
          ts: v.ts,
          value: v.value,
          comment: v.comment,
          metadata: meta(v.metadata),
        })),
      })),
      edges: edges.map((e) => ({
        src: [e.src[0], e.src[1]],
        dst: [e.dst[0], e.dst[1]],
        op_id: e.opId,
        comment: e.comment,
        metadata: meta(e.metadata),
      })),
    };
    return JSON.stringify(doc);
  }
}
