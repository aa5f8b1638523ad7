import { describe, expect, it } from "vitest";

import { SessionMessage } from "../src/protocol.js";
import { applyMessage, initialViewModel } from "../src/viewmodel.js";

let seq = 0;

function msg(kind: SessionMessage["kind"], payload: Record<string, unknown>): SessionMessage {
  seq += 1;
  return { kind, sessionId: "SID", seq, payload };
}

function fold(messages: SessionMessage[]) {
  return messages.reduce(applyMessage, initialViewModel());
}

describe("view model", () => {
  it("collects chat history in order", () => {
    seq = 0;
    const model = fold([
      msg("agentText", { text: "Hi!", templateId: "greeting" }),
      msg("userText", { text: "If it's hot, order coffee." }),
      msg("agentText", { text: "How do I know whether it's hot?" }),
    ]);
    expect(model.chatHistory.map((entry) => entry.speaker)).toEqual([
      "agent",
      "user",
      "agent",
    ]);
    expect(model.chatHistory[2].text).toContain("whether it's hot");
  });

  it("rejects out-of-order sequence numbers", () => {
    seq = 0;
    const first = msg("agentText", { text: "a" });
    const second = msg("agentText", { text: "b" });
    const model = fold([first, second]);
    expect(() => applyMessage(model, first)).toThrow(/arrived after/);
  });

  it("option prompts become buttons and clear on the next user turn", () => {
    seq = 0;
    let model = fold([
      msg("optionPrompt", { text: "Greater or less?", options: ["greater than", "less than"] }),
    ]);
    expect(model.optionButtons).toEqual(["greater than", "less than"]);
    model = applyMessage(model, msg("userText", { text: "greater than" }));
    expect(model.optionButtons).toEqual([]);
  });

  it("screen updates replace the screen and clear highlights", () => {
    seq = 0;
    const screen = {
      appName: "Maps",
      screenId: "main",
      objects: [
        {
          id: "a",
          kind: "textView",
          text: "25 min",
          bounds: [0, 0, 100, 50],
          clickable: false,
          longClickable: false,
          visible: true,
        },
      ],
    };
    let model = fold([msg("screenUpdate", screen)]);
    model = applyMessage(model, msg("highlight", { objectIds: ["a"] }));
    expect(model.highlightedIds).toEqual(["a"]);
    model = applyMessage(
      model,
      msg("screenUpdate", { ...screen, screenId: "other", objects: [] }),
    );
    expect(model.highlightedIds).toEqual([]);
  });

  it("highlights only objects present on the current screen", () => {
    seq = 0;
    const model = fold([
      msg("screenUpdate", {
        appName: "Maps",
        screenId: "main",
        objects: [
          {
            id: "present",
            kind: "textView",
            text: "25 min",
            bounds: [0, 0, 100, 50],
            clickable: false,
            longClickable: false,
            visible: true,
          },
        ],
      }),
      msg("highlight", { objectIds: ["present", "ghost"] }),
    ]);
    expect(model.highlightedIds).toEqual(["present"]);
  });

  it("demonstration mode toggles with the server announcement", () => {
    seq = 0;
    let model = fold([msg("demonstrationMode", { active: true, mode: "valueQuery" })]);
    expect(model.mode).toBe("demonstration");
    model = applyMessage(model, msg("demonstrationMode", { active: false }));
    expect(model.mode).toBe("chat");
  });
});
