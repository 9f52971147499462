import { describe, expect, it } from "vitest";

import type { ParamSpec } from "../src/api";
import {
  canSubmit,
  collectParams,
  fieldError,
  fieldsFor,
  initialValues,
} from "../src/forms";

const SPECS: ParamSpec[] = [
  {
    name: "order",
    kind: "enum",
    required: false,
    default: "asc",
    choices: ["asc", "desc"],
  },
  { name: "unique", kind: "bool", required: false, default: false },
  { name: "width", kind: "int", required: true },
  { name: "label", kind: "string", required: false },
];

describe("fieldsFor", () => {
  it("maps enum params to dropdowns with the declared choices", () => {
    const field = fieldsFor(SPECS)[0];
    expect(field.control).toBe("dropdown");
    expect(field.options).toEqual(["asc", "desc"]);
    expect(field.initial).toBe("asc");
  });

  it("maps bool params to checkboxes", () => {
    const field = fieldsFor(SPECS)[1];
    expect(field.control).toBe("checkbox");
    expect(field.initial).toBe("false");
  });

  it("maps int and string params to text inputs", () => {
    const fields = fieldsFor(SPECS);
    expect(fields[2].control).toBe("text");
    expect(fields[2].kind).toBe("int");
    expect(fields[3].control).toBe("text");
    expect(fields[3].kind).toBe("string");
  });

  it("derives identical fields from identical params", () => {
    const snapshot = JSON.stringify(SPECS);
    const first = fieldsFor(SPECS);
    const second = fieldsFor(SPECS);
    expect(second).toEqual(first);
    expect(JSON.stringify(SPECS)).toBe(snapshot);
    // mutating a produced field must not leak into the next call
    first[0].options?.push("sideways");
    expect(fieldsFor(SPECS)[0].options).toEqual(["asc", "desc"]);
  });
});

describe("fieldError", () => {
  const fields = fieldsFor(SPECS);

  it("requires a value only for required fields", () => {
    expect(fieldError(fields[2], "")).toBe("required");
    expect(fieldError(fields[3], "")).toBeNull();
  });

  it("checks the int kind on the client", () => {
    expect(fieldError(fields[2], "42")).toBeNull();
    expect(fieldError(fields[2], "-7")).toBeNull();
    expect(fieldError(fields[2], "4.2")).not.toBeNull();
    expect(fieldError(fields[2], "many")).not.toBeNull();
  });

  it("rejects values outside the enum choices", () => {
    expect(fieldError(fields[0], "desc")).toBeNull();
    expect(fieldError(fields[0], "sideways")).not.toBeNull();
  });
});

describe("canSubmit", () => {
  it("stays false until every required field is valid", () => {
    const fields = fieldsFor(SPECS);
    const values = initialValues(fields);
    expect(canSubmit(fields, values)).toBe(false);
    values.width.raw = "abc";
    expect(canSubmit(fields, values)).toBe(false);
    values.width.raw = "12";
    expect(canSubmit(fields, values)).toBe(true);
  });
});

describe("collectParams", () => {
  it("omits empty optional fields and types the rest", () => {
    const fields = fieldsFor(SPECS);
    const values = initialValues(fields);
    values.width.raw = "3";
    values.label.raw = "";
    const params = collectParams(fields, values);
    expect(params).toEqual({ order: "asc", unique: false, width: 3 });
  });

  it("parses bool and int raws into JSON types", () => {
    const fields = fieldsFor(SPECS);
    const values = initialValues(fields);
    values.unique.raw = "true";
    values.width.raw = "-5";
    values.label.raw = "1.2.3";
    const params = collectParams(fields, values);
    expect(params.unique).toBe(true);
    expect(params.width).toBe(-5);
    expect(params.label).toBe("1.2.3");
  });
});
