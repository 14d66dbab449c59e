import type { EditorState } from "./types.js";

const KEY = "posterlayout-editor-v1";

export interface SavedSession {
  state: EditorState;
  imageDataUrl: string | null;
  apiBase: string;
}

/** Large images are not persisted; the session saves without them. */
const MAX_DATA_URL_BYTES = 2_000_000;

export function saveSession(session: SavedSession): void {
  try {
    const slim: SavedSession = {
      ...session,
      imageDataUrl:
        session.imageDataUrl !== null && session.imageDataUrl.length <= MAX_DATA_URL_BYTES
          ? session.imageDataUrl
          : null,
    };
    localStorage.setItem(KEY, JSON.stringify(slim));
  } catch {
    // storage full or unavailable: persistence is best-effort
  }
}

export function loadSession(): SavedSession | null {
  try {
    const raw = localStorage.getItem(KEY);
    if (raw === null) return null;
    const parsed = JSON.parse(raw);
    if (typeof parsed !== "object" || parsed === null) return null;
    return parsed as SavedSession;
  } catch {
    return null;
  }
}

export function clearSession(): void {
  try {
    localStorage.removeItem(KEY);
  } catch {
    // ignore
  }
}
