import type { TriageController } from "./state.js";
import type { Filter, Sample } from "./types.js";
import { CATEGORIES, contextSlots, severityEnabled } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function renderContext(sample: Sample): HTMLElement {
  // highlight the original/deid slot pair in place; the string itself is
  // exactly the persisted CSV field
  const wrap = el("div", "context");
  contextSlots(sample).forEach((slot, i) => {
    if (i > 0) wrap.appendChild(el("span", "sep", " / "));
    const cls = slot.kind === "orig" ? "tok-orig" : slot.kind === "deid" ? "tok-deid" : "";
    wrap.appendChild(el("span", cls, slot.text));
  });
  return wrap;
}

export function render(controller: TriageController, root: HTMLElement): void {
  root.textContent = "";

  if (controller.banner !== null) {
    const banner = el("div", "banner", controller.banner + " ");
    const retry = el("button", "", "Retry");
    retry.addEventListener("click", () => void controller.loadQueue());
    banner.appendChild(retry);
    root.appendChild(banner);
    if (controller.samples.length === 0) return;
  }

  const bar = el("div", "toolbar");
  const { annotated, total } = controller.progress();
  bar.appendChild(el("span", "progress", `${annotated} / ${total} annotated`));
  const filter = el("select", "filter");
  for (const value of ["all", "unannotated", ...CATEGORIES]) {
    const opt = el("option", "", value);
    (opt as HTMLOptionElement).value = value;
    filter.appendChild(opt);
  }
  (filter as HTMLSelectElement).value = controller.filter;
  filter.addEventListener("change", () =>
    void controller.loadQueue((filter as HTMLSelectElement).value as Filter),
  );
  bar.appendChild(filter);
  root.appendChild(bar);

  const layout = el("div", "layout");
  layout.appendChild(renderTable(controller));
  layout.appendChild(renderDetail(controller));
  root.appendChild(layout);

  if (controller.conflict !== null) root.appendChild(renderConflict(controller));
}

function renderTable(controller: TriageController): HTMLElement {
  const table = el("table", "queue");
  const head = el("tr");
  for (const h of ["file", "original", "deid", "ed", "category", "severity", "v"]) {
    head.appendChild(el("th", "", h));
  }
  table.appendChild(head);
  controller.samples.forEach((sample, i) => {
    const row = el("tr", i === controller.selected ? "selected" : "");
    row.appendChild(el("td", "", sample.file_name));
    row.appendChild(el("td", "tok-orig", sample.original_token));
    row.appendChild(el("td", "tok-deid", sample.deid_token));
    row.appendChild(el("td", "badge", String(sample.edit_distance)));
    row.appendChild(el("td", "", sample.category));
    row.appendChild(el("td", "", sample.severity));
    row.appendChild(el("td", "", String(sample.version)));
    row.addEventListener("click", () => controller.select(i));
    table.appendChild(row);
  });
  return table;
}

function renderDetail(controller: TriageController): HTMLElement {
  const pane = el("div", "detail");
  const sample = controller.current();
  if (sample === null) {
    pane.appendChild(el("p", "", "No samples."));
    return pane;
  }
  pane.appendChild(el("h2", "", `${sample.file_name} #${sample.ordinal}`));
  pane.appendChild(el("span", "badge", `edit distance ${sample.edit_distance}`));
  pane.appendChild(el("span", "badge", `version ${sample.version}`));
  pane.appendChild(renderContext(sample));

  const categories = el("div", "categories");
  CATEGORIES.forEach((category, i) => {
    const btn = el("button", controller.pending.category === category ? "active" : "");
    btn.textContent = `${i + 1} ${category}`;
    btn.addEventListener("click", () => controller.chooseCategory(category));
    categories.appendChild(btn);
  });
  pane.appendChild(categories);

  const severity = el("div", "severity");
  const enabled = severityEnabled(controller.pending.category);
  (["High", "Low"] as const).forEach((level) => {
    const btn = el("button", controller.pending.severity === level ? "active" : "");
    btn.textContent = level === "High" ? "h High" : "l Low";
    (btn as HTMLButtonElement).disabled = !enabled;
    btn.addEventListener("click", () => controller.chooseSeverity(level));
    severity.appendChild(btn);
  });
  pane.appendChild(severity);

  if (controller.inlineError !== null) {
    pane.appendChild(el("p", "error", controller.inlineError));
  }
  const submit = el("button", "submit", "Submit (Enter)");
  (submit as HTMLButtonElement).disabled = !controller.canSubmit();
  submit.addEventListener("click", () => void controller.submit());
  pane.appendChild(submit);
  return pane;
}

function renderConflict(controller: TriageController): HTMLElement {
  const conflict = controller.conflict!;
  const dialog = el("div", "conflict");
  dialog.appendChild(el("h3", "", "Someone else annotated this sample"));
  dialog.appendChild(
    el(
      "p",
      "",
      `Current value: ${conflict.current.category} / ${conflict.current.severity} ` +
        `(version ${conflict.current.version}). Overwrite with ` +
        `${conflict.attempted.category} / ${conflict.attempted.severity ?? "NotApplicable"}?`,
    ),
  );
  const overwrite = el("button", "", "Overwrite");
  overwrite.addEventListener("click", () => void controller.overwriteConflict());
  const keep = el("button", "", "Keep theirs");
  keep.addEventListener("click", () => controller.acceptConflict());
  dialog.appendChild(overwrite);
  dialog.appendChild(keep);
  return dialog;
}
