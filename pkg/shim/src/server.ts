import http from "node:http";
import { AddressInfo } from "node:net";

import {
  PromptFormatError,
  echoCompletion,
  promptTokenCount,
  scoreLogit,
  sentenceVector,
  tokenVectors,
} from "./deterministic";
import { REGISTRY, findModel } from "./registry";

/**
 * JSON-over-HTTP backend service.
 *
 * POST /v1/embed    {model_id, texts[], pooling}                          -> vectors
 * POST /v1/generate {model_id, prompt, temperature, max_new_tokens, seed} -> {text}
 * POST /v1/score    {model_id, pairs[]}                                   -> {logits[]}
 * GET  /v1/health                                                          -> registry
 *
 * Endpoints are stateless; in deterministic mode identical request bodies
 * yield identical responses. Numbers serialize at full double precision.
 */

interface ErrorBody {
  error: string;
  [key: string]: unknown;
}

class RequestError extends Error {
  constructor(public status: number, public body: ErrorBody) {
    super(body.error);
  }
}

function badRequest(error: string, extra: Record<string, unknown> = {}): RequestError {
  return new RequestError(400, { error, ...extra });
}

function asStringArray(value: unknown, field: string): string[] {
  if (!Array.isArray(value) || !value.every((x) => typeof x === "string")) {
    throw badRequest("bad_request", { detail: `${field} must be an array of strings` });
  }
  return value;
}

function handleEmbed(body: Record<string, unknown>): unknown {
  const modelId = String(body.model_id ?? "");
  const texts = asStringArray(body.texts, "texts");
  const pooling = String(body.pooling ?? "sentence");
  if (pooling === "sentence") {
    const entry = findModel(modelId, "sentence_embed");
    if (!entry || entry.dim === undefined) {
      throw badRequest("unknown_model", { model_id: modelId, pooling });
    }
    return {
      dim: entry.dim,
      vectors: texts.map((t) => sentenceVector(modelId, t, entry.dim as number)),
    };
  }
  if (pooling === "token") {
    const entry = findModel(modelId, "token_embed");
    if (!entry || entry.dim === undefined) {
      throw badRequest("unknown_model", { model_id: modelId, pooling });
    }
    const perText = texts.map((t) => tokenVectors(modelId, t, entry.dim as number));
    return {
      dim: entry.dim,
      tokens: perText.map((p) => p.tokens),
      token_vectors: perText.map((p) => p.vectors),
    };
  }
  throw badRequest("pooling_unsupported", { pooling });
}

function handleGenerate(body: Record<string, unknown>): unknown {
  const modelId = String(body.model_id ?? "");
  const entry = findModel(modelId, "generate");
  if (!entry) throw badRequest("unknown_model", { model_id: modelId });
  const prompt = typeof body.prompt === "string" ? body.prompt : null;
  if (prompt === null) throw badRequest("bad_request", { detail: "prompt must be a string" });
  const maxNewTokens = Number(body.max_new_tokens ?? 512);
  if (!Number.isFinite(maxNewTokens) || maxNewTokens < 1) {
    throw badRequest("bad_request", { detail: "max_new_tokens must be >= 1" });
  }
  const limit = entry.prompt_token_limit ?? Infinity;
  if (promptTokenCount(prompt) > limit) {
    throw badRequest("prompt_too_long", { model_id: modelId, limit });
  }
  try {
    return { text: echoCompletion(prompt, maxNewTokens) };
  } catch (err) {
    if (err instanceof PromptFormatError) {
      throw badRequest("bad_request", { detail: err.message });
    }
    throw err;
  }
}

function handleScore(body: Record<string, unknown>): unknown {
  const modelId = String(body.model_id ?? "");
  const entry = findModel(modelId, "score");
  if (!entry) throw badRequest("unknown_model", { model_id: modelId });
  const pairs = body.pairs;
  if (
    !Array.isArray(pairs) ||
    !pairs.every(
      (p) =>
        Array.isArray(p) && p.length === 2 && typeof p[0] === "string" && typeof p[1] === "string",
    )
  ) {
    throw badRequest("bad_request", { detail: "pairs must be [question, passage] arrays" });
  }
  return { logits: pairs.map((p) => scoreLogit(p[0] as string, p[1] as string)) };
}

function handleHealth(): unknown {
  return { mode: "deterministic", models: REGISTRY };
}

async function readJsonBody(req: http.IncomingMessage): Promise<Record<string, unknown>> {
  const chunks: Buffer[] = [];
  for await (const chunk of req) chunks.push(chunk as Buffer);
  const raw = Buffer.concat(chunks).toString("utf8");
  try {
    const parsed = JSON.parse(raw);
    if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
      throw new Error("body must be a JSON object");
    }
    return parsed as Record<string, unknown>;
  } catch {
    throw badRequest("bad_request", { detail: "body is not a JSON object" });
  }
}

export function createShimServer(): http.Server {
  return http.createServer(async (req, res) => {
    const respond = (status: number, payload: unknown) => {
      const body = JSON.stringify(payload);
      res.writeHead(status, {
        "Content-Type": "application/json; charset=utf-8",
        "Content-Length": Buffer.byteLength(body),
      });
      res.end(body);
    };

    try {
      if (req.method === "GET" && req.url === "/v1/health") {
        respond(200, handleHealth());
        return;
      }
      if (req.method === "POST") {
        const body = await readJsonBody(req);
        if (req.url === "/v1/embed") {
          respond(200, handleEmbed(body));
          return;
        }
        if (req.url === "/v1/generate") {
          respond(200, handleGenerate(body));
          return;
        }
        if (req.url === "/v1/score") {
          respond(200, handleScore(body));
          return;
        }
      }
      respond(404, { error: "not_found", path: req.url });
    } catch (err) {
      if (err instanceof RequestError) {
        respond(err.status, err.body);
      } else {
        respond(500, { error: "internal", detail: String(err) });
      }
    }
  });
}

export function startShim(port: number, host = "127.0.0.1"): Promise<http.Server> {
  const server = createShimServer();
  return new Promise((resolve, reject) => {
    server.once("error", reject);
    server.listen(port, host, () => {
      const address = server.address() as AddressInfo;
      // The startup line is machine-parsed by clients that spawn the shim.
      console.log(`shim listening on http://${host}:${address.port}`);
      resolve(server);
    });
  });
}

function parseArgs(argv: string[]): { port: number; host: string } {
  let port = 8787;
  let host = "127.0.0.1";
  for (let i = 0; i < argv.length; i += 1) {
    if (argv[i] === "--port") port = Number(argv[i + 1]);
    if (argv[i] === "--host") host = String(argv[i + 1]);
  }
  return { port, host };
}

if (require.main === module) {
  const { port, host } = parseArgs(process.argv.slice(2));
  startShim(port, host).catch((err) => {
    console.error(err);
    process.exit(1);
  });
}
