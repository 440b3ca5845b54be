import assert from "node:assert/strict";
import { after, before, describe, it } from "node:test";
import type http from "node:http";
import { AddressInfo } from "node:net";

import { createShimServer } from "../src/server";
import { tokenize, truncateTokens } from "../src/tokenize";

let server: http.Server;
let baseUrl: string;

before(async () => {
  server = createShimServer();
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const address = server.address() as AddressInfo;
  baseUrl = `http://127.0.0.1:${address.port}`;
});

after(() => {
  server.close();
});

async function post(path: string, body: unknown): Promise<{ status: number; json: any }> {
  const response = await fetch(baseUrl + path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  return { status: response.status, json: await response.json() };
}

const QA_PROMPT =
  "Answer the question based on the given context.\n" +
  "##Question\nQ\n##Context\none two three four five\n##Answer\n";

function norm(vector: number[]): number {
  return Math.sqrt(vector.reduce((acc, x) => acc + x * x, 0));
}

function dot(a: number[], b: number[]): number {
  return a.reduce((acc, x, i) => acc + x * b[i], 0);
}

describe("health", () => {
  it("reports the model registry", async () => {
    const response = await fetch(`${baseUrl}/v1/health`);
    assert.equal(response.status, 200);
    const body = await response.json();
    assert.equal(body.mode, "deterministic");
    const ids = body.models.map((m: any) => m.model_id);
    for (const id of ["use", "labse", "laser", "mbert", "aps", "echo"]) {
      assert.ok(ids.includes(id), `registry is missing ${id}`);
    }
    const use = body.models.find((m: any) => m.model_id === "use");
    assert.equal(use.kind, "sentence_embed");
    assert.ok(use.dim > 0);
  });
});

describe("embed", () => {
  it("returns unit-normalized vectors of the declared dim", async () => {
    const { status, json } = await post("/v1/embed", {
      model_id: "use",
      texts: ["hello world", "नमस्ते दुनिया"],
      pooling: "sentence",
    });
    assert.equal(status, 200);
    assert.equal(json.dim, 512);
    assert.equal(json.vectors.length, 2);
    for (const vector of json.vectors) {
      assert.equal(vector.length, 512);
      assert.ok(Math.abs(norm(vector) - 1.0) < 1e-6);
    }
  });

  it("is deterministic: same text twice gives identical vectors", async () => {
    const first = await post("/v1/embed", {
      model_id: "labse",
      texts: ["repeatable"],
      pooling: "sentence",
    });
    const second = await post("/v1/embed", {
      model_id: "labse",
      texts: ["repeatable"],
      pooling: "sentence",
    });
    assert.deepEqual(first.json.vectors, second.json.vectors);
    assert.ok(Math.abs(dot(first.json.vectors[0], second.json.vectors[0]) - 1.0) < 1e-6);
  });

  it("token pooling returns one vector per token with token strings", async () => {
    const { status, json } = await post("/v1/embed", {
      model_id: "mbert",
      texts: ["two words"],
      pooling: "token",
    });
    assert.equal(status, 200);
    assert.deepEqual(json.tokens, [["two", "words"]]);
    assert.equal(json.token_vectors[0].length, 2);
    assert.equal(json.token_vectors[0][0].length, json.dim);
    for (const vector of json.token_vectors[0]) {
      assert.ok(Math.abs(norm(vector) - 1.0) < 1e-6);
    }
  });

  it("rejects unknown models and poolings", async () => {
    const unknown = await post("/v1/embed", {
      model_id: "nope",
      texts: ["x"],
      pooling: "sentence",
    });
    assert.equal(unknown.status, 400);
    assert.equal(unknown.json.error, "unknown_model");

    const pooling = await post("/v1/embed", { model_id: "use", texts: ["x"], pooling: "mean" });
    assert.equal(pooling.status, 400);
    assert.equal(pooling.json.error, "pooling_unsupported");
  });
});

describe("generate", () => {
  it("echoes the context slice of the QA prompt", async () => {
    const { status, json } = await post("/v1/generate", {
      model_id: "echo",
      prompt: QA_PROMPT,
      temperature: 0.001,
      max_new_tokens: 64,
      seed: 0,
    });
    assert.equal(status, 200);
    assert.equal(json.text, "one two three four five");
  });

  it("is deterministic at temperature 0.001 with a fixed seed", async () => {
    const request = {
      model_id: "echo",
      prompt: QA_PROMPT,
      temperature: 0.001,
      max_new_tokens: 64,
      seed: 7,
    };
    const first = await post("/v1/generate", request);
    const second = await post("/v1/generate", request);
    assert.equal(first.json.text, second.json.text);
  });

  it("truncates to max_new_tokens at a token boundary", async () => {
    const { json } = await post("/v1/generate", {
      model_id: "echo",
      prompt: QA_PROMPT,
      temperature: 0.001,
      max_new_tokens: 3,
      seed: 0,
    });
    assert.equal(json.text, "one two three");
  });

  it("refuses over-limit prompts with prompt_too_long", async () => {
    const hugeContext = Array.from({ length: 9000 }, (_, i) => `w${i}`).join(" ");
    const prompt =
      "Answer the question based on the given context.\n" +
      `##Question\nQ\n##Context\n${hugeContext}\n##Answer\n`;
    const { status, json } = await post("/v1/generate", {
      model_id: "echo",
      prompt,
      temperature: 0.001,
      max_new_tokens: 4,
      seed: 0,
    });
    assert.equal(status, 400);
    assert.equal(json.error, "prompt_too_long");
    assert.equal(json.model_id, "echo");
    assert.ok(json.limit >= 1);
  });
});

describe("score", () => {
  it("returns one logit in [0, 1] per pair", async () => {
    const { status, json } = await post("/v1/score", {
      model_id: "aps",
      pairs: [
        ["q1", "p1"],
        ["q2", "p2"],
      ],
    });
    assert.equal(status, 200);
    assert.equal(json.logits.length, 2);
    for (const logit of json.logits) {
      assert.ok(logit >= 0 && logit <= 1);
    }
  });

  it("batch of one equals the same position in a batch of n", async () => {
    const pairs: [string, string][] = [
      ["which river?", "the river bends east"],
      ["which river?", "unrelated text"],
      ["who wrote it?", "the author is unknown"],
    ];
    const batched = await post("/v1/score", { model_id: "aps", pairs });
    for (let i = 0; i < pairs.length; i += 1) {
      const single = await post("/v1/score", { model_id: "aps", pairs: [pairs[i]] });
      assert.ok(Math.abs(single.json.logits[0] - batched.json.logits[i]) <= 1e-6);
    }
  });
});

describe("tokenize", () => {
  it("keeps Indic words whole", () => {
    const tokens = tokenize("मैं घर जाता").map((t) => t.text);
    assert.deepEqual(tokens, ["मैं", "घर", "जाता"]);
  });

  it("truncate cuts at token boundaries", () => {
    assert.equal(truncateTokens("a b c d", 2), "a b");
    assert.equal(truncateTokens("a b", 9), "a b");
  });
});
