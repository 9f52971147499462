/** Session state: one token per tab, shared across tabs via Storage. */

import type { LoginResponse } from "./api";

const STORAGE_KEY = "sselab-session";

export interface SessionState {
  token: string;
  expiresAt: number;
  username: string;
  userId: string;
  scopes: string[];
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class Session {
  private state: SessionState | null = null;

  constructor(private storage: StorageLike) {
    this.state = this.restore();
  }

  private restore(): SessionState | null {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) {
      return null;
    }
    try {
      const parsed = JSON.parse(raw) as SessionState;
      if (!parsed.token || parsed.expiresAt * 1000 <= Date.now()) {
        return null;
      }
      return parsed;
    } catch {
      return null;
    }
  }

  accept(login: LoginResponse): void {
    this.state = {
      token: login.token,
      expiresAt: login.expires_at,
      username: login.username,
      userId: login.user_id,
      scopes: login.scopes,
    };
    this.storage.setItem(STORAGE_KEY, JSON.stringify(this.state));
  }

  clear(): void {
    this.state = null;
    this.storage.removeItem(STORAGE_KEY);
  }

  get active(): boolean {
    return this.state !== null && this.state.expiresAt * 1000 > Date.now();
  }

  get token(): string | null {
    return this.active && this.state ? this.state.token : null;
  }

  get username(): string {
    return this.state?.username ?? "";
  }

  /** Admin panels render only when the token carries the admin scope. */
  get admin(): boolean {
    return this.active && (this.state?.scopes.includes("admin") ?? false);
  }
}
