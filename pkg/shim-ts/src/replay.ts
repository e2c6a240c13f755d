/**
 * Replay a declarative instrumentation script through the shim and write the
 * canonical trace file. Scripts are the shared corpus format, so outputs can
 * be byte-compared against the core recorder's exports.
 *
 * Usage: node dist/src/replay.js <script.json> <out.trace.json>
 */

import { readFileSync } from "node:fs";

import { Endpoint, ShimContext, Snapshot, VarConfig, VarRef } from "./shim";

interface EndpointDoc {
  ref?: string;
  snapshot?: Snapshot;
  config?: VarConfig;
}

interface CommandDoc {
  op: string;
  label?: string;
  name?: string;
  category?: string;
  comment?: string;
  metadata?: Record<string, string>;
  snapshot?: Snapshot;
  config?: VarConfig;
  source?: EndpointDoc;
  target?: EndpointDoc;
  save_as?: string;
}

export interface ScriptDoc {
  graph_id?: string;
  metadata?: Record<string, string>;
  commands: CommandDoc[];
}

function endpoint(doc: EndpointDoc, handles: Map<string, VarRef>): Endpoint {
  if (doc.ref !== undefined) {
    const ref = handles.get(doc.ref);
    if (ref === undefined) {
      throw new Error(`unknown handle '${doc.ref}'`);
    }
    return ref;
  }
  return [doc.snapshot as Snapshot, doc.config ?? {}];
}

export function replay(script: ScriptDoc): ShimContext {
  const ctx = new ShimContext(script.graph_id ?? "corpus", script.metadata ?? {});
  const handles = new Map<string, VarRef>();
  for (const cmd of script.commands) {
    switch (cmd.op) {
      case "begin_session":
        ctx.beginSession(cmd.label ?? "", cmd.comment ?? "", cmd.metadata ?? {});
        break;
      case "end_session":
        ctx.endSession();
        break;
      case "begin_operation":
        ctx.beginOperation(cmd.name ?? "", cmd.category ?? "", cmd.comment ?? "",
                           cmd.metadata ?? {});
        break;
      case "end_operation":
        ctx.endOperation();
        break;
      case "comment_variable": {
        const ref = ctx.commentVariable(cmd.snapshot as Snapshot, cmd.config ?? {});
        if (cmd.save_as !== undefined) {
          handles.set(cmd.save_as, ref);
        }
        break;
      }
      case "comment_link": {
        const edge = ctx.commentLink(endpoint(cmd.source as EndpointDoc, handles),
                                     endpoint(cmd.target as EndpointDoc, handles),
                                     cmd.comment ?? "", cmd.metadata ?? {});
        if (cmd.save_as !== undefined) {
          handles.set(cmd.save_as, edge.dst);
        }
        break;
      }
      default:
        throw new Error(`unknown corpus command '${cmd.op}'`);
    }
  }
  return ctx;
}

export function replayFile(path: string): ShimContext {
  return replay(JSON.parse(readFileSync(path, "utf-8")) as ScriptDoc);
}

if (require.main === module) {
  const [scriptPath, outPath] = process.argv.slice(2);
  if (!scriptPath || !outPath) {
    console.error("usage: replay.js <script.json> <out.trace.json>");
    process.exit(2);
  }
  replayFile(scriptPath).finish(outPath);
}
