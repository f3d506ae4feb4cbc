// Query selection model and the error-code -> human message table.

export interface QuerySelection {
  district: string;
  date: string; // YYYY-MM-DD
  hour: number; // 0-23
  horizon: number; // 1-48
  model: string;
}

export const DEFAULT_HORIZON = 12;
export const DEFAULT_MODEL = "gbdt";

export function startTimestamp(selection: QuerySelection): string {
  const hh = String(selection.hour).padStart(2, "0");
  return `${selection.date}T${hh}:00:00`;
}

export function historyRange(selection: QuerySelection, hours = 48): { from: string; to: string } {
  const to = startTimestamp(selection);
  const end = new Date(`${to}Z`);
  const begin = new Date(end.getTime() - (hours - 1) * 3600_000);
  const pad = (n: number) => String(n).padStart(2, "0");
  const from =
    `${begin.getUTCFullYear()}-${pad(begin.getUTCMonth() + 1)}-${pad(begin.getUTCDate())}` +
    `T${pad(begin.getUTCHours())}:00:00`;
  return { from, to };
}

export function isComplete(selection: Partial<QuerySelection>): selection is QuerySelection {
  return Boolean(selection.district && selection.date && selection.hour !== undefined);
}

// One distinct message per service error code; unknown codes fall through.
export const ERROR_MESSAGES: Record<string, string> = {
  unknown_district: "This district is not served.",
  artifact_not_found: "No trained model is available for this district and model type.",
  invalid_horizon: "The horizon must be between 1 and 48 hours.",
  invalid_timestamp: "The date or hour could not be understood.",
  invalid_range: "The history range is reversed.",
  invalid_model: "Unknown model type.",
  insufficient_history: "Not enough history before this hour.",
  invalid_request: "The request was malformed.",
  network: "The forecast service is unreachable.",
};

export function errorMessage(code: string, fallback: string): string {
  return ERROR_MESSAGES[code] ?? `Unexpected error: ${fallback || code}`;
}
