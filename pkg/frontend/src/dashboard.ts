// Dashboard state mirrors the server's /pipeline/status and /model
// responses exactly. The raw response bodies are retained and every
// figure is read from them; the console never recomputes accuracy or
// any other metric locally.

import { ModelInfo, PipelineStatus } from "./api.js";

export interface DashboardModel {
  statusRaw: string; // exact /api/v1/pipeline/status body
  modelRaw: string | null; // exact /api/v1/model body, null when 503
  status: PipelineStatus;
  model: ModelInfo | null;
  fetchedAt: string;
}

export function dashboardFromResponses(
  statusBody: string,
  modelBody: string | null,
): DashboardModel {
  return {
    statusRaw: statusBody,
    modelRaw: modelBody,
    status: JSON.parse(statusBody) as PipelineStatus,
    model: modelBody === null ? null : (JSON.parse(modelBody) as ModelInfo),
    fetchedAt: new Date().toISOString(),
  };
}

/** Null accuracy renders as a collection progress note, never as a number. */
export function formatRollingAccuracy(model: DashboardModel): string {
  const { rolling_accuracy, window_fill, window } = model.status;
  if (rolling_accuracy === null) {
    return `collecting feedback (${window_fill}/${window})`;
  }
  return `${(rolling_accuracy * 100).toFixed(1)}%`;
}

export function formatProductionVersion(model: DashboardModel): string {
  return model.model === null ? "no production model" : `v${model.model.version_id}`;
}

export interface BadgeState {
  schedule: boolean;
  degradation: boolean; // styled as an alert when true
}

export function badgeStates(model: DashboardModel): BadgeState {
  return {
    schedule: model.status.triggers.schedule,
    degradation: model.status.triggers.degradation,
  };
}

export function lastRunSummary(model: DashboardModel): string {
  const run = model.status.last_run;
  if (!run) return "no runs yet";
  if (run.aborted_at) return `${run.run_id}: aborted at ${run.aborted_at}`;
  return `${run.run_id}: ${run.accepted ? "accepted" : "rejected"}`;
}
