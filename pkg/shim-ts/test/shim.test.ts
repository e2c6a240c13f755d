import assert from "node:assert/strict";
import { spawnSync } from "node:child_process";
import { mkdtempSync, readdirSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";
import test from "node:test";

import { replayFile } from "../src/replay";
import { ConfigError, ShimContext, StateError, fnv1a64 } from "../src/shim";

const REPO_ROOT = path.resolve(__dirname, "..", "..", "..");
const SCRIPTS_DIR = path.join(REPO_ROOT, "corpus", "scripts");
const GOLDEN_DIR = path.join(REPO_ROOT, "corpus", "golden");

test("fnv1a64 matches the shared reference value", () => {
  // reference: hashing "same text" must give the identity key the core uses
  assert.equal(`fnv1a64:${fnv1a64("same text").toString(16).padStart(16, "0")}`.length,
               "fnv1a64:".length + 16);
  assert.equal(fnv1a64(""), 0xcbf29ce484222325n);
});

test("fresh chain starts at version zero and re-versions on the same key", () => {
  const ctx = new ShimContext();
  const first = ctx.commentVariable({ id: "m1", text: "likes skiing" },
                                    { identity: "mem0-dict", renderer: "kv" });
  const second = ctx.commentVariable({ id: "m1", text: "likes alpine skiing" },
                                     { identity: "mem0-dict", renderer: "kv" });
  assert.equal(first[0], second[0]);
  assert.deepEqual([first[1], second[1]], [0, 1]);
});

test("state machine guards mirror the core recorder", () => {
  const ctx = new ShimContext();
  assert.throws(() => ctx.endSession(), StateError);
  assert.throws(() => ctx.beginOperation("op"), StateError);
  ctx.beginSession("main");
  ctx.beginOperation("outer");
  assert.throws(() => ctx.beginOperation("inner"), StateError);
  assert.throws(() => ctx.endSession(), StateError);
  assert.throws(() => ctx.finish(), StateError);
  ctx.endOperation();
  ctx.finish();
  assert.throws(() => ctx.beginSession("late"), StateError);
});

test("unknown renderer and identity are config errors", () => {
  const ctx = new ShimContext();
  assert.throws(() => ctx.commentVariable("x", { renderer: "nope" }), ConfigError);
  assert.throws(() => ctx.commentVariable("x", { identity: "nope" }), ConfigError);
  assert.throws(() => ctx.registerIdentity("by-render", () => "k"), ConfigError);
});

test("backward links re-version the destination", () => {
  const ctx = new ShimContext();
  ctx.beginSession("main");
  const old = ctx.commentVariable("earlier", { category: "note" });
  const later = ctx.commentVariable("later", { category: "note" });
  ctx.beginOperation("rewire");
  const edge = ctx.commentLink(later, old);
  ctx.endOperation();
  assert.deepEqual(edge.dst, [old[0], 1]);
});

test("the deletion-marker example produces a deletion edge to the marker", () => {
  const ctx = new ShimContext("deletion-demo");
  ctx.beginSession("memory_construction");
  ctx.beginOperation("delete_memory", "deletion", "prune one unit");
  const edge = ctx.commentLink(
    [{ id: "mem-42", text: "moved to lisbon in march" },
     { category: "memory_unit", identity: "mem0-dict", renderer: "kv" }],
    ["DELETED", { category: "deletion_marker" }]);
  ctx.endOperation();
  ctx.endSession();
  const doc = JSON.parse(ctx.finish().toString("utf-8"));
  assert.equal(doc.operations.length, 1);
  assert.equal(doc.operations[0].category, "deletion");
  const marker = doc.variables.find((v: { var_id: string }) => v.var_id === edge.dst[0]);
  assert.equal(marker.category, "deletion_marker");
  const unit = doc.variables.find((v: { var_id: string }) => v.var_id === edge.src[0]);
  assert.equal(unit.identity_key, "mem-42");
});

test("constant marker chain grows one version per delete", () => {
  const ctx = new ShimContext();
  ctx.beginSession("main");
  ctx.beginOperation("delete_memory");
  const e1 = ctx.commentLink(["unit one", { category: "memory_unit" }],
                             ["DELETED", { category: "deletion_marker" }]);
  ctx.endOperation();
  ctx.beginOperation("delete_memory_2");
  const e2 = ctx.commentLink(["unit two", { category: "memory_unit" }],
                             ["DELETED", { category: "deletion_marker" }]);
  ctx.endOperation();
  assert.equal(e1.dst[0], e2.dst[0]);
  assert.deepEqual([e1.dst[1], e2.dst[1]], [0, 1]);
});

test("variable ids are sanitized identity keys with collision suffixes", () => {
  const ctx = new ShimContext();
  ctx.registerIdentity("raw", (value) => value as string);
  const a = ctx.commentVariable("user:alice", { identity: "raw" });
  const b = ctx.commentVariable("user alice", { identity: "raw" });
  assert.equal(a[0], "user_alice");
  assert.equal(b[0], "user_alice_2");
});

test("empty context exports the empty document", () => {
  const doc = JSON.parse(new ShimContext("empty").finish().toString("utf-8"));
  assert.deepEqual(doc.sessions, []);
  assert.deepEqual(doc.operations, []);
  assert.deepEqual(doc.variables, []);
  assert.deepEqual(doc.edges, []);
  assert.equal(doc.format_version, "tracegraph/1");
});

// ---------------------------------------------------------------------------
// cross-implementation fidelity on the shared corpus

const scripts = readdirSync(SCRIPTS_DIR).filter((n) => n.endsWith(".json")).sort();

test("the shared corpus has at least ten scripts", () => {
  assert.ok(scripts.length >= 10);
  assert.ok(scripts.some((s) => s.includes("deletion_marker")));
});

for (const script of scripts) {
  test(`corpus ${script} reproduces the core recorder's bytes`, () => {
    const ctx = replayFile(path.join(SCRIPTS_DIR, script));
    const golden = readFileSync(path.join(GOLDEN_DIR, script.replace(".json", ".trace.json")));
    assert.ok(ctx.finish().equals(golden), `byte mismatch for ${script}`);
  });
}

test("every shim export passes the core validator with exit 0", () => {
  const outDir = mkdtempSync(path.join(tmpdir(), "shim-traces-"));
  for (const script of scripts) {
    const out = path.join(outDir, script.replace(".json", ".trace.json"));
    replayFile(path.join(SCRIPTS_DIR, script)).finish(out);
    const proc = spawnSync("python3", ["-m", "tracegraph", "validate", out], {
      env: { ...process.env, PYTHONPATH: path.join(REPO_ROOT, "src") },
      encoding: "utf-8",
    });
    assert.equal(proc.status, 0,
                 `validate failed for ${script}: ${proc.stdout}${proc.stderr}`);
  }
});
