/** Protocol purity: the scripted Task-1 gesture sequence emits exactly the
 * input stream whose server-side transcript the engine's test suite proved
 * byte-identical to the headless transcript runner's (the fixtures here
 * are exported by that suite).
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import {
  OutboundMessage,
  demoDoneMessage,
  longPressMessage,
  tapMessage,
  userTextMessage,
} from "../src/protocol.js";
import { SessionMessage } from "../src/protocol.js";
import { applyMessage, initialViewModel } from "../src/viewmodel.js";

const fixtures = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

function loadJson<T>(name: string): T {
  return JSON.parse(readFileSync(join(fixtures, name), "utf-8")) as T;
}

/** Task 1 exactly as a browser user performs it. */
function scriptedTask1(): OutboundMessage[] {
  return [
    userTextMessage("If it's hot, turn on the air conditioner."),
    userTextMessage("It is hot when the temperature is above 85 degrees Fahrenheit."),
    userTextMessage("Let me demonstrate for you."),
    tapMessage("icon_Weather"),
    longPressMessage("temp_value"),
    demoDoneMessage("temp_value"),
    userTextMessage("I can demonstrate."),
    tapMessage("icon_Thermostat"),
    tapMessage("btn_cool"),
    demoDoneMessage(null),
    userTextMessage("nothing"),
    userTextMessage("yes"),
    userTextMessage("If it's hot, order a cup of iced coffee."),
    userTextMessage("yes"),
    userTextMessage("I can demonstrate."),
    tapMessage("icon_Starbucks"),
    tapMessage("btn_menu"),
    tapMessage("item_iced_coffee"),
    tapMessage("btn_order"),
    demoDoneMessage(null),
    userTextMessage("Order a cup of hot coffee."),
    userTextMessage("yes"),
  ];
}

describe("protocol purity", () => {
  it("scripted gestures emit exactly the proven input stream", () => {
    const golden = loadJson<unknown[]>("task1_ui_inputs.json");
    expect(scriptedTask1()).toEqual(golden);
  });

  it("the recorded transcript replays through the view model cleanly", () => {
    const log = readFileSync(join(fixtures, "task1_message_log.txt"), "utf-8");
    const messages = log
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as SessionMessage);
    let model = initialViewModel();
    for (const message of messages) {
      model = applyMessage(model, message); // throws on any seq reordering
    }
    expect(model.lastSeq).toBe(messages.length);
    const texts = model.chatHistory.map((entry) => entry.text);
    expect(texts).toContain("How do I know whether it's hot?");
    expect(
      texts.some((text) =>
        text.includes("Is it the same here when determining whether to order a cup of iced coffee?"),
      ),
    ).toBe(true);
    // the whole session was mirrored, never computed locally:
    // 11 typed turns plus 3 demonstration-finished echoes
    expect(model.chatHistory.filter((entry) => entry.speaker === "user").length).toBe(
      14,
    );
  });
});
