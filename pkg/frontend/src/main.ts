// Browser wiring: dashboard polling (5 s), the review queue, entry
// building, and the manual pipeline trigger.

import { ApiClient } from "./api.js";
import {
  badgeStates,
  dashboardFromResponses,
  formatProductionVersion,
  formatRollingAccuracy,
  lastRunSummary,
} from "./dashboard.js";
import { fetchReviewQueue, toReviewImage } from "./queue.js";
import {
  EntryLimitError,
  MAX_ENTRY_IMAGES,
  ReviewEntry,
  addImage,
  newEntry,
  setDiagnosis,
  submitEntry,
} from "./review.js";

const POLL_INTERVAL_MS = 5000;
const QUEUE_LIMIT = 20;

const api = new ApiClient("");
let entry: ReviewEntry = newEntry();
const acknowledged = new Set<string>();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(message: string, kind: "error" | "info" | "none"): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message;
  banner.className = kind === "none" ? "banner hidden" : `banner ${kind}`;
}

async function refreshDashboard(): Promise<void> {
  try {
    const [statusBody, modelBody] = await Promise.all([
      api.pipelineStatusRaw(),
      api.modelInfoRaw(),
    ]);
    const model = dashboardFromResponses(statusBody, modelBody);
    el("rolling-accuracy").textContent = formatRollingAccuracy(model);
    el("production-version").textContent = formatProductionVersion(model);
    el("last-run").textContent = lastRunSummary(model);
    const badges = badgeStates(model);
    el("badge-schedule").className = badges.schedule ? "badge on" : "badge";
    el("badge-degradation").className = badges.degradation
      ? "badge alert"
      : "badge";
    setBanner("", "none");
  } catch {
    setBanner("service unreachable; retrying", "error");
  }
}

function renderEntry(): void {
  const list = el<HTMLUListElement>("entry-images");
  list.innerHTML = "";
  for (const image of entry.images) {
    const item = document.createElement("li");
    const chosen = entry.diagnoses[image.requestId];
    item.innerHTML = `
      <span class="mono">${image.requestId.slice(0, 8)}</span>
      model: <b>${image.modelLabel}</b> (${image.probability.toFixed(3)})
      <label><input type="radio" name="dx-${image.requestId}" value="benign"
        ${chosen === "benign" ? "checked" : ""}> benign</label>
      <label><input type="radio" name="dx-${image.requestId}" value="malignant"
        ${chosen === "malignant" ? "checked" : ""}> malignant</label>`;
    if (image.thumbnailUrl) {
      const thumb = document.createElement("img");
      thumb.src = image.thumbnailUrl;
      thumb.className = "thumb";
      item.prepend(thumb);
    }
    item.querySelectorAll("input").forEach((input) =>
      input.addEventListener("change", () => {
        setDiagnosis(entry, image.requestId, (input as HTMLInputElement)
          .value as "benign" | "malignant");
      }),
    );
    list.appendChild(item);
  }
  el("entry-count").textContent =
    `${entry.images.length}/${MAX_ENTRY_IMAGES} images`;
}

async function refreshQueue(): Promise<void> {
  try {
    const items = await fetchReviewQueue(api, QUEUE_LIMIT);
    const list = el<HTMLUListElement>("queue");
    list.innerHTML = "";
    if (items.length === 0) {
      const empty = document.createElement("li");
      empty.textContent = "no unreviewed classifications";
      empty.className = "empty";
      list.appendChild(empty);
      return;
    }
    for (const item of items) {
      const node = document.createElement("li");
      node.innerHTML = `<span class="mono">${item.request_id.slice(0, 8)}</span>
        ${item.label} (${item.probability.toFixed(3)}) v${item.model_version}`;
      const button = document.createElement("button");
      button.textContent = "add to entry";
      button.addEventListener("click", () => {
        try {
          addImage(entry, toReviewImage(api, item));
          renderEntry();
        } catch (err) {
          if (err instanceof EntryLimitError) setBanner(err.message, "error");
        }
      });
      node.appendChild(button);
      list.appendChild(node);
    }
  } catch {
    setBanner("could not load review queue; retrying", "error");
  }
}

async function onSubmitEntry(): Promise<void> {
  try {
    const results = await submitEntry(api, entry, acknowledged);
    const failures = results.filter((result) => !result.ok);
    if (failures.length === 0) {
      setBanner(`submitted ${results.length} verdicts`, "info");
      entry = newEntry();
      acknowledged.clear();
      renderEntry();
    } else {
      setBanner(
        failures
          .map((failure) => `${failure.requestId.slice(0, 8)}: HTTP ${failure.status}`)
          .join("; "),
        "error",
      );
    }
    await refreshQueue();
  } catch (err) {
    setBanner(err instanceof Error ? err.message : String(err), "error");
  }
}

async function onRunPipeline(): Promise<void> {
  const { status } = await api.triggerPipeline("console");
  if (status === 409) {
    setBanner("run already in progress", "info");
  } else if (status === 202) {
    setBanner("pipeline run started", "info");
  } else {
    setBanner(`trigger failed: HTTP ${status}`, "error");
  }
}

export function boot(): void {
  el("submit-entry").addEventListener("click", () => void onSubmitEntry());
  el("run-pipeline").addEventListener("click", () => void onRunPipeline());
  renderEntry();
  void refreshDashboard();
  void refreshQueue();
  setInterval(() => {
    void refreshDashboard();
    void refreshQueue();
  }, POLL_INTERVAL_MS);
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
