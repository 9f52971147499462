import { describe, expect, it } from "vitest";

import type { LoginResponse } from "../src/api";
import { Session } from "../src/session";
import type { StorageLike } from "../src/session";

function fakeStorage(initial: Record<string, string> = {}): StorageLike {
  const data = new Map(Object.entries(initial));
  return {
    getItem: (key) => data.get(key) ?? null,
    setItem: (key, value) => void data.set(key, value),
    removeItem: (key) => void data.delete(key),
  };
}

function login(overrides: Partial<LoginResponse> = {}): LoginResponse {
  return {
    token: "tok-1",
    expires_at: Date.now() / 1000 + 3600,
    scopes: ["profile", "use"],
    user_id: "u-1",
    username: "ada",
    ...overrides,
  };
}

describe("Session", () => {
  it("is inactive before any login", () => {
    const session = new Session(fakeStorage());
    expect(session.active).toBe(false);
    expect(session.token).toBeNull();
  });

  it("accepts a login and exposes the token", () => {
    const session = new Session(fakeStorage());
    session.accept(login());
    expect(session.active).toBe(true);
    expect(session.token).toBe("tok-1");
    expect(session.username).toBe("ada");
  });

  it("treats admin as a scope, not a flag", () => {
    const session = new Session(fakeStorage());
    session.accept(login());
    expect(session.admin).toBe(false);
    session.accept(login({ scopes: ["admin", "profile", "use"] }));
    expect(session.admin).toBe(true);
  });

  it("survives a reload through storage", () => {
    const storage = fakeStorage();
    new Session(storage).accept(login());
    const revived = new Session(storage);
    expect(revived.active).toBe(true);
    expect(revived.token).toBe("tok-1");
    expect(revived.username).toBe("ada");
  });

  it("drops expired state on restore", () => {
    const storage = fakeStorage();
    new Session(storage).accept(login({ expires_at: Date.now() / 1000 - 10 }));
    const revived = new Session(storage);
    expect(revived.active).toBe(false);
    expect(revived.token).toBeNull();
  });

  it("ignores corrupt storage contents", () => {
    const storage = fakeStorage({ "sselab-session": "{not json" });
    expect(new Session(storage).active).toBe(false);
  });

  it("clear() removes the persisted state", () => {
    const storage = fakeStorage();
    const session = new Session(storage);
    session.accept(login());
    session.clear();
    expect(session.active).toBe(false);
    expect(new Session(storage).active).toBe(false);
  });
});
