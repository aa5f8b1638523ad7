/** Browser entry point: WebSocket wiring and DOM updates. */

import {
  OutboundMessage,
  SessionMessage,
  demoDoneMessage,
  longPressMessage,
  tapMessage,
  undoMessage,
  userTextMessage,
} from "./protocol.js";
import { renderScreen } from "./screen.js";
import {
  UiViewModel,
  applyMessage,
  initialViewModel,
  noteSelection,
} from "./viewmodel.js";

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

export class App {
  model: UiViewModel = initialViewModel();
  private socket: WebSocket | null = null;
  private turnInFlight = false;

  constructor(private readonly root: Document) {}

  connect(url: string): void {
    this.socket = new WebSocket(url);
    this.socket.addEventListener("message", (event) => {
      const message = JSON.parse(String(event.data)) as SessionMessage;
      this.model = applyMessage(this.model, message);
      this.turnInFlight = false;
      this.render();
    });
    this.socket.addEventListener("close", () => {
      this.socket = null;
      element("banner").textContent =
        "Connection lost. The session is read-only; reload to reconnect.";
      element("banner").classList.add("visible");
      this.render();
    });
  }

  /** Every user gesture becomes exactly one message; none are retried. */
  send(message: OutboundMessage): void {
    if (this.socket === null || this.turnInFlight) {
      return;
    }
    this.turnInFlight = true;
    this.socket.send(JSON.stringify(message));
  }

  sendText(): void {
    const input = element<HTMLInputElement>("chat-input");
    const text = input.value.trim();
    if (text) {
      input.value = "";
      this.send(userTextMessage(text));
    }
  }

  render(): void {
    const chat = element("chat");
    chat.textContent = "";
    for (const entry of this.model.chatHistory) {
      const bubble = this.root.createElement("div");
      bubble.className = `bubble ${entry.speaker} kind-${entry.kind}`;
      bubble.textContent = entry.text;
      chat.appendChild(bubble);
    }
    chat.scrollTop = chat.scrollHeight;

    const options = element("options");
    options.textContent = "";
    for (const option of this.model.optionButtons) {
      const button = this.root.createElement("button");
      button.textContent = option;
      button.addEventListener("click", () => this.send(userTextMessage(option)));
      options.appendChild(button);
    }

    const demoBar = element("demo-bar");
    demoBar.classList.toggle("visible", this.model.mode === "demonstration");

    const disabled = this.socket === null || this.turnInFlight;
    element<HTMLInputElement>("chat-input").disabled = disabled;
    element<HTMLButtonElement>("send").disabled = disabled;

    renderScreen(element("screen"), this.model, {
      onTap: (objectId) => {
        if (this.model.mode === "demonstration") {
          this.send(tapMessage(objectId));
        }
      },
      onLongPress: (objectId) => {
        if (this.model.mode === "demonstration") {
          this.model = noteSelection(this.model, objectId);
          this.send(longPressMessage(objectId));
        }
      },
    });
  }

  wire(): void {
    element("send").addEventListener("click", () => this.sendText());
    element<HTMLInputElement>("chat-input").addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter") {
        this.sendText();
      }
    });
    element("undo").addEventListener("click", () => this.send(undoMessage()));
    element("demo-done").addEventListener("click", () =>
      this.send(demoDoneMessage(this.model.lastSelectedId)),
    );
  }
}

export function start(): void {
  const app = new App(document);
  app.wire();
  const url = `ws://${location.host}/ws`;
  app.connect(url);
  app.render();
}

if (typeof window !== "undefined" && "WebSocket" in window && document.getElementById("chat")) {
  start();
}
