import { ApiClient } from "./api.js";
import { bindKeyboard } from "./keyboard.js";
import { render } from "./render.js";
import { TriageController } from "./state.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app container");

const controller = new TriageController(new ApiClient(""));
controller.onChange(() => render(controller, root));
bindKeyboard(controller, document);
void controller.loadQueue("all");
