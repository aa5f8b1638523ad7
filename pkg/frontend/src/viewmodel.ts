/** Pure view-model: folds session messages into renderable state.
 *
 * The client computes nothing itself: no parsing, no highlight logic, no
 * knowledge-base state. It only mirrors what the gateway sends, which is
 * what keeps a browser-driven session byte-identical to a headless one.
 */

import { ScreenObject, ScreenPayload, SessionMessage } from "./protocol.js";

export interface ChatEntry {
  speaker: "user" | "agent";
  kind: string; // message kind, used for styling
  text: string;
  options?: string[];
}

export interface UiViewModel {
  chatHistory: ChatEntry[];
  currentScreen: ScreenPayload | null;
  highlightedIds: string[];
  optionButtons: string[];
  mode: "chat" | "demonstration";
  lastSeq: number;
  lastSelectedId: string | null;
}

export function initialViewModel(): UiViewModel {
  return {
    chatHistory: [],
    currentScreen: null,
    highlightedIds: [],
    optionButtons: [],
    mode: "chat",
    lastSeq: 0,
    lastSelectedId: null,
  };
}

function text(message: SessionMessage): string {
  return String(message.payload["text"] ?? "");
}

/** Apply one message; sequence numbers must arrive in order. */
export function applyMessage(model: UiViewModel, message: SessionMessage): UiViewModel {
  if (message.seq <= model.lastSeq) {
    throw new Error(`message ${message.seq} arrived after ${model.lastSeq}`);
  }
  const next: UiViewModel = { ...model, lastSeq: message.seq };
  switch (message.kind) {
    case "userText":
      next.chatHistory = [
        ...model.chatHistory,
        { speaker: "user", kind: "userText", text: text(message) },
      ];
      next.optionButtons = [];
      break;
    case "agentText":
    case "confirmation":
    case "error":
      next.chatHistory = [
        ...model.chatHistory,
        { speaker: "agent", kind: message.kind, text: text(message) },
      ];
      break;
    case "optionPrompt": {
      const options = (message.payload["options"] as string[]) ?? [];
      next.chatHistory = [
        ...model.chatHistory,
        { speaker: "agent", kind: "optionPrompt", text: text(message), options },
      ];
      next.optionButtons = options;
      break;
    }
    case "screenUpdate":
      next.currentScreen = message.payload as unknown as ScreenPayload;
      next.highlightedIds = []; // a new screen clears stale overlays
      break;
    case "highlight": {
      const ids = (message.payload["objectIds"] as string[]) ?? [];
      const present = new Set(
        (next.currentScreen?.objects ?? []).map((object) => object.id),
      );
      next.highlightedIds = ids.filter((id) => present.has(id));
      break;
    }
    case "demonstrationMode":
      next.mode = message.payload["active"] ? "demonstration" : "chat";
      if (next.mode === "demonstration") {
        next.lastSelectedId = null;
      }
      break;
    case "scriptResult": {
      const branch = message.payload["branch"];
      next.chatHistory = [
        ...model.chatHistory,
        {
          speaker: "agent",
          kind: "scriptResult",
          text: `Ran ${message.payload["script"]}: took the ${branch} branch.`,
        },
      ];
      break;
    }
    default:
      break;
  }
  return next;
}

export function noteSelection(model: UiViewModel, objectId: string): UiViewModel {
  return { ...model, lastSelectedId: objectId };
}

export function visibleObjects(model: UiViewModel): ScreenObject[] {
  return (model.currentScreen?.objects ?? []).filter((object) => object.visible);
}
