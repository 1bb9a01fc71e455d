// The review queue: most recent classifications that have no feedback
// yet, newest first. Network failures surface to the caller for a
// retryable banner; nothing is swallowed.

import { ApiClient, QueueItem } from "./api.js";
import { ReviewImage } from "./review.js";

export async function fetchReviewQueue(
  api: ApiClient,
  limit: number,
): Promise<QueueItem[]> {
  return api.reviewQueue(limit);
}

export function toReviewImage(api: ApiClient, item: QueueItem): ReviewImage {
  return {
    requestId: item.request_id,
    modelLabel: item.label,
    probability: item.probability,
    thumbnailUrl: api.thumbnailUrl(item),
  };
}
