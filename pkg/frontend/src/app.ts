import { ApiClient, ApiError } from "./api.js";
import { renderOutput, renderRetryBanner, renderUserMessage } from "./render.js";
import type { SessionReply } from "./types.js";

/** Chat shell: one session per mount, one in-flight request at a time.
 *
 * The app owns no domain logic — every reply is rendered as delivered, and
 * every action posts literal REPL text. A failed request leaves the session
 * untouched and offers a retry; the session is never recreated behind the
 * user's back.
 */
export class ChatApp {
  private sessionId: string | null = null;
  private state = "home";
  private busy = false;
  private lastRequest: (() => Promise<SessionReply>) | null = null;

  private readonly log: HTMLElement;
  private readonly bannerSlot: HTMLElement;
  private readonly composer: HTMLFormElement;
  private readonly input: HTMLInputElement;
  private readonly uploadLabel: HTMLLabelElement;
  private readonly uploadInput: HTMLInputElement;

  constructor(private readonly root: HTMLElement, private readonly api: ApiClient) {
    root.classList.add("chat");

    this.log = document.createElement("div");
    this.log.className = "chat-log";
    this.bannerSlot = document.createElement("div");
    this.bannerSlot.className = "banner-slot";

    this.composer = document.createElement("form");
    this.composer.className = "composer";
    this.input = document.createElement("input");
    this.input.type = "text";
    this.input.placeholder = "Type a message…";
    const send = document.createElement("button");
    send.type = "submit";
    send.textContent = "Send";
    this.composer.append(this.input, send);

    this.uploadLabel = document.createElement("label");
    this.uploadLabel.className = "upload hidden";
    this.uploadLabel.append("📷 Attach micrograph ");
    this.uploadInput = document.createElement("input");
    this.uploadInput.type = "file";
    this.uploadInput.accept = "image/png,image/jpeg";
    this.uploadLabel.append(this.uploadInput);

    root.append(this.log, this.bannerSlot, this.uploadLabel, this.composer);

    this.composer.addEventListener("submit", (event) => {
      event.preventDefault();
      const text = this.input.value;
      this.input.value = "";
      this.sendText(text);
    });
    this.uploadInput.addEventListener("change", () => {
      const file = this.uploadInput.files?.[0];
      this.uploadInput.value = "";
      if (file) this.sendImage(file);
    });
    this.root.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.dataset.send !== undefined) {
        this.sendText(target.dataset.send);
      } else if (target.dataset.retry !== undefined) {
        this.retry();
      } else if (target.dataset.download !== undefined && this.sessionId) {
        window.open(this.api.reportUrl(this.sessionId), "_blank");
      }
    });
  }

  boot(): Promise<void> {
    return this.run(() => this.api.createSession());
  }

  sendText(text: string): void {
    if (!this.sessionId || this.busy) return;
    const id = this.sessionId;
    this.log.append(renderUserMessage(text));
    void this.run(() => this.api.sendText(id, text));
  }

  sendImage(file: File): void {
    if (!this.sessionId || this.busy) return;
    const id = this.sessionId;
    this.log.append(renderUserMessage("", file.name));
    void this.run(() => this.api.sendImage(id, file));
  }

  retry(): void {
    if (this.lastRequest) void this.run(this.lastRequest);
  }

  get currentState(): string {
    return this.state;
  }

  private async run(make: () => Promise<SessionReply>): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    this.bannerSlot.replaceChildren();
    this.lastRequest = make;
    try {
      const reply = await make();
      this.sessionId = reply.session_id;
      this.state = reply.state;
      for (const output of reply.outputs) {
        this.log.append(renderOutput(output));
      }
      this.uploadLabel.classList.toggle(
        "hidden", !this.state.startsWith("image_await"));
      if (reply.ended) {
        this.input.disabled = true;
      }
    } catch (err) {
      const message = err instanceof ApiError ? err.message : String(err);
      this.bannerSlot.append(renderRetryBanner(message));
    } finally {
      this.busy = false;
    }
  }
}

export function mountApp(root: HTMLElement, api: ApiClient): ChatApp {
  return new ChatApp(root, api);
}

const autoRoot = typeof document !== "undefined" ? document.getElementById("app") : null;
if (autoRoot) {
  const base =
    new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8080";
  void mountApp(autoRoot, new ApiClient(base)).boot();
}
