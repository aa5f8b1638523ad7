/** Wire types for the gateway's newline-delimited JSON session protocol. */

export interface SessionMessage {
  kind:
    | "userText"
    | "agentText"
    | "screenUpdate"
    | "highlight"
    | "optionPrompt"
    | "demonstrationMode"
    | "confirmation"
    | "error"
    | "scriptResult";
  sessionId: string;
  seq: number;
  payload: Record<string, unknown>;
}

export interface ScreenObject {
  id: string;
  kind: "textView" | "button" | "input" | "image" | "listItem";
  text: string;
  bounds: [number, number, number, number]; // left, top, right, bottom
  clickable: boolean;
  longClickable: boolean;
  visible: boolean;
}

export interface ScreenPayload {
  appName: string;
  screenId: string;
  objects: ScreenObject[];
}

/** Client -> server messages. Every user gesture becomes exactly one. */
export type OutboundMessage =
  | { kind: "userText"; text: string }
  | {
      kind: "demonstrationMode";
      payload:
        | { action: { kind: "click" | "longClickSelect"; objectId: string } }
        | { done: true; selectedObjectId: string | null };
    };

export function userTextMessage(text: string): OutboundMessage {
  return { kind: "userText", text };
}

export function tapMessage(objectId: string): OutboundMessage {
  return { kind: "demonstrationMode", payload: { action: { kind: "click", objectId } } };
}

export function longPressMessage(objectId: string): OutboundMessage {
  return {
    kind: "demonstrationMode",
    payload: { action: { kind: "longClickSelect", objectId } },
  };
}

export function demoDoneMessage(selectedObjectId: string | null): OutboundMessage {
  return { kind: "demonstrationMode", payload: { done: true, selectedObjectId } };
}

export function undoMessage(): OutboundMessage {
  return userTextMessage("undo");
}
