// Review-entry logic: a dermatologist reviews up to ten classifications,
// records a diagnosis per image, and the entry maps each one to a
// feedback verdict. Verdict derivation lives here, client-side; the
// server stores only verdict + true_label.

import { ApiClient, Diagnosis, FeedbackPayload } from "./api.js";

export const MAX_ENTRY_IMAGES = 10;

export interface ReviewImage {
  requestId: string;
  modelLabel: Diagnosis;
  probability: number;
  thumbnailUrl: string | null;
}

export interface ReviewEntry {
  images: ReviewImage[];
  diagnoses: Record<string, Diagnosis>; // keyed by requestId
  createdAt: string;
}

export class EntryLimitError extends Error {
  constructor() {
    super(`an entry may contain at most ${MAX_ENTRY_IMAGES} images`);
  }
}

export function newEntry(): ReviewEntry {
  return { images: [], diagnoses: {}, createdAt: new Date().toISOString() };
}

/** Enforced at the form level: the 11th image never reaches the network. */
export function addImage(entry: ReviewEntry, image: ReviewImage): void {
  if (entry.images.length >= MAX_ENTRY_IMAGES) {
    throw new EntryLimitError();
  }
  if (entry.images.some((existing) => existing.requestId === image.requestId)) {
    return; // same classification can't be queued twice
  }
  entry.images.push(image);
}

export function setDiagnosis(
  entry: ReviewEntry,
  requestId: string,
  diagnosis: Diagnosis,
): void {
  entry.diagnoses[requestId] = diagnosis;
}

/**
 * Agreement with the model is a `correct` verdict; disagreement is
 * `incorrect` and carries the dermatologist's diagnosis as true_label.
 */
export function deriveVerdict(
  dermatologistDiagnosis: Diagnosis,
  modelLabel: Diagnosis,
): Omit<FeedbackPayload, "request_id"> {
  if (dermatologistDiagnosis === modelLabel) {
    return { verdict: "correct" };
  }
  return { verdict: "incorrect", true_label: dermatologistDiagnosis };
}

export function buildFeedbackPayloads(entry: ReviewEntry): FeedbackPayload[] {
  if (entry.images.length < 1 || entry.images.length > MAX_ENTRY_IMAGES) {
    throw new EntryLimitError();
  }
  return entry.images.map((image) => {
    const diagnosis = entry.diagnoses[image.requestId];
    if (!diagnosis) {
      throw new Error(`image ${image.requestId} has no diagnosis selected`);
    }
    return { request_id: image.requestId, ...deriveVerdict(diagnosis, image.modelLabel) };
  });
}

export interface SubmissionResult {
  requestId: string;
  status: number; // 204 ok, 409 duplicate, anything else is a failure
  ok: boolean;
}

/**
 * One feedback POST per image. Partial failures are reported per image;
 * images already acknowledged (from a previous attempt) are skipped, so a
 * retry never re-sends what the server accepted.
 */
export async function submitEntry(
  api: ApiClient,
  entry: ReviewEntry,
  acknowledged: Set<string> = new Set(),
): Promise<SubmissionResult[]> {
  const payloads = buildFeedbackPayloads(entry);
  const results: SubmissionResult[] = [];
  for (const payload of payloads) {
    if (acknowledged.has(payload.request_id)) {
      results.push({ requestId: payload.request_id, status: 204, ok: true });
      continue;
    }
    const status = await api.submitFeedback(payload);
    const ok = status === 204;
    if (ok) acknowledged.add(payload.request_id);
    results.push({ requestId: payload.request_id, status, ok });
  }
  return results;
}
