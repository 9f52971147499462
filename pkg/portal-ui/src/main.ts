// Browser entry point; the bundle boots the app against the real
// window.fetch and localStorage.
import { mount } from "./app";

const root = document.getElementById("app");
if (root) {
  mount(root, {
    fetchImpl: window.fetch.bind(window),
    storage: window.localStorage,
  });
}
