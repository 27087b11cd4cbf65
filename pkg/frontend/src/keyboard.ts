import type { TriageController } from "./state.js";
import { CATEGORIES } from "./types.js";

/**
 * Single-key shortcuts for queue throughput. Every binding calls the same
 * controller method as the corresponding button, nothing more.
 *
 *   j / ArrowDown  next sample         k / ArrowUp  previous sample
 *   1..6           set category        h / l        severity High / Low
 *   Enter          submit
 */
export function handleKey(controller: TriageController, key: string): boolean | Promise<void> {
  switch (key) {
    case "j":
    case "ArrowDown":
      controller.selectNext();
      return true;
    case "k":
    case "ArrowUp":
      controller.selectPrev();
      return true;
    case "h":
      controller.chooseSeverity("High");
      return true;
    case "l":
      controller.chooseSeverity("Low");
      return true;
    case "Enter":
      return controller.submit();
    default: {
      const n = Number.parseInt(key, 10);
      if (n >= 1 && n <= CATEGORIES.length) {
        controller.chooseCategory(CATEGORIES[n - 1]);
        return true;
      }
      return false;
    }
  }
}

export function bindKeyboard(controller: TriageController, target: EventTarget): void {
  target.addEventListener("keydown", (event) => {
    const e = event as KeyboardEvent;
    const tag = (e.target as HTMLElement | null)?.tagName ?? "";
    if (tag === "INPUT" || tag === "TEXTAREA" || tag === "SELECT") return;
    if (handleKey(controller, e.key) !== false) e.preventDefault();
  });
}
