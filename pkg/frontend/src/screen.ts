/** Renders the simulated phone screen and turns gestures into messages.
 *
 * The 1080x1920 fixture space is drawn at one third scale (360x640 CSS
 * px). A press held for at least 500 ms is a long-press (value
 * selection); anything shorter is a tap.
 */

import { UiViewModel } from "./viewmodel.js";

export const SCALE = 1 / 3;
export const PHONE_WIDTH = 360;
export const PHONE_HEIGHT = 640;
export const LONG_PRESS_MS = 500;

export interface GestureHandlers {
  onTap(objectId: string): void;
  onLongPress(objectId: string): void;
}

export function renderScreen(
  container: HTMLElement,
  model: UiViewModel,
  handlers: GestureHandlers,
): void {
  container.textContent = "";
  container.classList.add("phone");
  container.style.width = `${PHONE_WIDTH}px`;
  container.style.height = `${PHONE_HEIGHT}px`;
  const screen = model.currentScreen;
  if (screen === null) {
    return;
  }
  container.dataset.appName = screen.appName;
  container.dataset.screenId = screen.screenId;
  const highlighted = new Set(model.highlightedIds);
  for (const object of screen.objects) {
    if (!object.visible) {
      continue;
    }
    const [left, top, right, bottom] = object.bounds;
    const element = document.createElement("div");
    element.className = `screen-object kind-${object.kind}`;
    element.dataset.objectId = object.id;
    element.style.left = `${left * SCALE}px`;
    element.style.top = `${top * SCALE}px`;
    element.style.width = `${(right - left) * SCALE}px`;
    element.style.height = `${(bottom - top) * SCALE}px`;
    element.textContent = object.text;
    attachGestures(element, object.id, handlers);
    container.appendChild(element);
    if (highlighted.has(object.id)) {
      const overlay = document.createElement("div");
      overlay.className = "highlight-overlay";
      overlay.dataset.highlightFor = object.id;
      overlay.style.left = `${left * SCALE}px`;
      overlay.style.top = `${top * SCALE}px`;
      overlay.style.width = `${(right - left) * SCALE}px`;
      overlay.style.height = `${(bottom - top) * SCALE}px`;
      container.appendChild(overlay);
    }
  }
}

function attachGestures(
  element: HTMLElement,
  objectId: string,
  handlers: GestureHandlers,
): void {
  let pressedAt = 0;
  let timer: ReturnType<typeof setTimeout> | null = null;
  let firedLongPress = false;

  element.addEventListener("pointerdown", () => {
    pressedAt = Date.now();
    firedLongPress = false;
    timer = setTimeout(() => {
      firedLongPress = true;
      handlers.onLongPress(objectId);
    }, LONG_PRESS_MS);
  });
  element.addEventListener("pointerup", () => {
    if (timer !== null) {
      clearTimeout(timer);
      timer = null;
    }
    if (!firedLongPress && pressedAt !== 0) {
      handlers.onTap(objectId);
    }
    pressedAt = 0;
  });
  element.addEventListener("pointerleave", () => {
    if (timer !== null) {
      clearTimeout(timer);
      timer = null;
    }
    pressedAt = 0;
  });
}
