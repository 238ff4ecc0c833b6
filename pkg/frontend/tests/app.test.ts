import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { mountApp } from "../src/app.js";
import type { SessionReply } from "../src/types.js";
import recordedRaw from "./fixtures/api_payloads.json";
import scenarioRaw from "./fixtures/ui_post_bodies.json";

type Step = { type: "message" | "image"; text?: string; fixture?: string; filename?: string };
const scenario = (scenarioRaw as { steps: Step[] }).steps;
const recorded = recordedRaw as unknown as { step: object; payload: SessionReply }[];

const BASE = "http://api.test";
const SESSION_ID = recorded[0].payload.session_id;

interface Captured {
  url: string;
  method: string;
  body: unknown;
}

function replyStub(queue: SessionReply[], captured: Captured[]) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    captured.push({ url, method: init?.method ?? "GET", body: init?.body });
    const payload = queue.shift();
    if (!payload) throw new Error("stub exhausted");
    return {
      ok: true,
      status: 200,
      json: async () => payload,
    } as unknown as Response;
  };
}

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

function setFiles(input: HTMLInputElement, file: File): void {
  Object.defineProperty(input, "files", {
    value: { 0: file, length: 1, item: () => file },
    configurable: true,
  });
}

function typeInComposer(root: HTMLElement, text: string): void {
  const input = root.querySelector<HTMLInputElement>(".composer input")!;
  input.value = text;
  root
    .querySelector<HTMLFormElement>("form.composer")!
    .dispatchEvent(new Event("submit", { cancelable: true }));
}

function clickSend(root: HTMLElement, send: string): void {
  const bubbles = Array.from(root.querySelectorAll<HTMLElement>(".msg.agent"));
  for (let i = bubbles.length - 1; i >= 0; i--) {
    const button = bubbles[i].querySelector<HTMLButtonElement>(
      `button[data-send="${send}"]`,
    );
    if (button) {
      button.dispatchEvent(new Event("click", { bubbles: true }));
      return;
    }
  }
  throw new Error(`no rendered control posts '${send}'`);
}

beforeEach(() => {
  document.body.innerHTML = "<div id='root'></div>";
});

describe("thin-client scenario", () => {
  it("drives the recorded click-through and POSTs exactly the fixture bodies", async () => {
    const captured: Captured[] = [];
    const queue = recorded.map((r) => r.payload);
    const root = document.getElementById("root")!;
    const app = mountApp(root, new ApiClient(BASE, replyStub(queue, captured)));
    await app.boot();

    for (const step of scenario) {
      if (step.type === "image") {
        const uploadLabel = root.querySelector<HTMLElement>("label.upload")!;
        expect(uploadLabel.classList.contains("hidden")).toBe(false);
        const input = uploadLabel.querySelector<HTMLInputElement>("input[type=file]")!;
        setFiles(input, new File([new Uint8Array([1, 2, 3])], step.filename!, { type: "image/png" }));
        input.dispatchEvent(new Event("change"));
      } else if (["1", "no", "6"].includes(step.text!)) {
        // These arrive as rendered controls; the rest is typed free text.
        clickSend(root, step.text!);
      } else {
        typeInComposer(root, step.text!);
      }
      await flush();
      await flush();
    }

    expect(captured).toHaveLength(1 + scenario.length);
    expect(captured[0].method).toBe("POST");
    expect(captured[0].url).toBe(`${BASE}/sessions`);
    expect(captured.filter((c) => c.url === `${BASE}/sessions`)).toHaveLength(1);

    scenario.forEach((step, i) => {
      const request = captured[i + 1];
      expect(request.method).toBe("POST");
      if (step.type === "message") {
        expect(request.url).toBe(`${BASE}/sessions/${SESSION_ID}/messages`);
        expect(JSON.parse(request.body as string)).toEqual({ text: step.text });
      } else {
        expect(request.url).toBe(`${BASE}/sessions/${SESSION_ID}/images`);
        const form = request.body as FormData;
        expect((form.get("file") as File).name).toBe(step.filename);
        expect(form.get("hypothesis")).toBeNull();
        expect(form.get("material")).toBeNull();
      }
    });
  });

  it("disables the composer once the session has ended", async () => {
    const captured: Captured[] = [];
    const queue = recorded.map((r) => r.payload);
    const root = document.getElementById("root")!;
    const app = mountApp(root, new ApiClient(BASE, replyStub(queue, captured)));
    await app.boot();
    for (const step of scenario) {
      if (step.type === "image") {
        app.sendImage(new File([new Uint8Array([1])], step.filename!));
      } else {
        app.sendText(step.text!);
      }
      await flush();
      await flush();
    }
    const input = root.querySelector<HTMLInputElement>(".composer input")!;
    expect(input.disabled).toBe(true);
    expect(app.currentState).toBe("home");
  });
});

describe("failure handling", () => {
  it("renders a retry banner and re-sends the same request without a new session", async () => {
    const captured: Captured[] = [];
    let failNext = false;
    const queue = [recorded[0].payload, recorded[1].payload];
    const stub = replyStub(queue, captured);
    const flaky = async (url: string, init?: RequestInit): Promise<Response> => {
      if (failNext) {
        captured.push({ url, method: init?.method ?? "GET", body: init?.body });
        failNext = false;
        throw new TypeError("fetch failed");
      }
      return stub(url, init);
    };

    const root = document.getElementById("root")!;
    const app = mountApp(root, new ApiClient(BASE, flaky));
    await app.boot();

    failNext = true;
    typeInComposer(root, "Cracking");
    await flush();

    const banner = root.querySelector(".retry-banner");
    expect(banner).not.toBeNull();
    expect(banner!.textContent).toContain("network error");

    banner!
      .querySelector<HTMLButtonElement>("button[data-retry]")!
      .dispatchEvent(new Event("click", { bubbles: true }));
    await flush();

    expect(root.querySelector(".retry-banner")).toBeNull();
    const posts = captured.filter((c) => c.url.endsWith("/messages"));
    expect(posts).toHaveLength(2);
    expect(posts[0].body).toBe(posts[1].body as string);
    expect(captured.filter((c) => c.url === `${BASE}/sessions`)).toHaveLength(1);
  });
});
