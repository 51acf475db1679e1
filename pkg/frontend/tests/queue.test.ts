import { describe, expect, it } from "vitest";

import { orderFields, sortQueue, summarize } from "../src/queue.js";
import type { CardRecord, ServiceConfig, StoredRecord } from "../src/types.js";

const CONF_PAIRED = [
  "identifier", "name", "birthPlace", "birthDate", "gender", "bloodType",
  "address", "religion", "marriageStatus", "occupation",
  "issuedProvince", "issuedCity", "issuedDate",
];

const CONFIG: ServiceConfig = {
  confidence_review_threshold: 85,
  correctable_fields: [...CONF_PAIRED, "expiryDate"],
  conf_paired_fields: CONF_PAIRED,
  validation_rules: {},
};

function makeRecord(overrides: Partial<CardRecord> = {}): CardRecord {
  return {
    kind: "C",
    identifier: "3471040209790001",
    name: "RIYANTO",
    birthPlace: "GROBOGAN",
    birthDate: "02-09-1979",
    gender: "M",
    bloodType: "O",
    address: "PRM PURI DOMAS D-3 SEMPU",
    religion: "ISLAM",
    marriageStatus: "M",
    occupation: "KARYAWAN SWASTA",
    nationalityCode: "IND",
    expiryDate: "04-05-2017",
    facePhoto: "",
    cardImage: "",
    issuerCountryCode: "IND",
    issuedProvince: "DAERAH ISTIMEWA YOGYAKARTA",
    issuedCity: "KABUPATEN SLEMAN",
    issuedDate: "04-05-2012",
    faceTop: -1,
    faceLeft: -1,
    faceWidth: -1,
    faceHeight: -1,
    extractedAt: "04-05-2012",
    identifierconf: 96,
    nameconf: 95,
    birthPlaceconf: 94,
    birthDateconf: 93,
    genderconf: 92,
    bloodTypeconf: 91,
    addressconf: 90,
    religionconf: 89,
    marriageStatusconf: 88,
    occupationconf: 87,
    issuedProvinceconf: 86,
    issuedCityconf: 85,
    issuedDateconf: 99,
    ...overrides,
  };
}

function stored(
  id: string,
  flagged: string[],
  overrides: Partial<CardRecord> = {},
): StoredRecord {
  return {
    record_id: id,
    record: makeRecord(overrides),
    flagged_fields: flagged,
    status: flagged.length > 0 ? "pending-review" : "auto-accepted",
    revision: 0,
    corrections: [],
  };
}

describe("orderFields", () => {
  it("puts flagged fields first, in the server's order", () => {
    const item = stored("r1", ["identifier", "religion"], {
      identifierconf: 76,
      religionconf: 53,
    });
    const names = orderFields(item, CONFIG).map((f) => f.name);
    expect(names.slice(0, 2)).toEqual(["identifier", "religion"]);
    expect(names).toHaveLength(CONFIG.correctable_fields.length);
    // the tail keeps canonical order with the flagged entries removed
    expect(names.slice(2)).toEqual(
      CONFIG.correctable_fields.filter((n) => n !== "identifier" && n !== "religion"),
    );
  });

  it("marks exactly the flagged fields and carries their confidences", () => {
    const item = stored("r1", ["religion"], { religionconf: 18 });
    const fields = orderFields(item, CONFIG);
    const religion = fields[0];
    expect(religion.name).toBe("religion");
    expect(religion.flagged).toBe(true);
    expect(religion.conf).toBe(18);
    expect(religion.value).toBe("ISLAM");
    for (const field of fields.slice(1)) {
      expect(field.flagged).toBe(false);
    }
  });

  it("gives conf-free fields a null confidence", () => {
    const fields = orderFields(stored("r1", []), CONFIG);
    const expiry = fields.find((f) => f.name === "expiryDate")!;
    expect(expiry.conf).toBeNull();
    expect(expiry.value).toBe("04-05-2017");
  });

  it("keeps canonical order when nothing is flagged", () => {
    const names = orderFields(stored("r1", []), CONFIG).map((f) => f.name);
    expect(names).toEqual(CONFIG.correctable_fields);
  });
});

describe("summarize", () => {
  it("reports the worst confidence among flagged fields", () => {
    const item = stored("a".repeat(64), ["identifier", "religion"], {
      identifierconf: 76,
      religionconf: 53,
    });
    const s = summarize(item);
    expect(s.shortId).toBe("a".repeat(12));
    expect(s.flaggedCount).toBe(2);
    expect(s.worstConf).toBe(53);
    expect(s.revision).toBe(0);
  });

  it("has no worst confidence when nothing is flagged", () => {
    expect(summarize(stored("r1", [])).worstConf).toBeNull();
  });
});

describe("sortQueue", () => {
  it("orders by worst confidence, then flagged count, then id", () => {
    const mild = stored("bbb", ["identifier"], { identifierconf: 80 });
    const bad = stored("aaa", ["religion"], { religionconf: 10 });
    const wide = stored("ccc", ["identifier", "religion"], {
      identifierconf: 80,
      religionconf: 80,
    });
    const ordered = sortQueue([mild, wide, bad]).map((i) => i.record_id);
    // 10 beats 80; among the 80s the two-field record is more urgent
    expect(ordered).toEqual(["aaa", "ccc", "bbb"]);
  });

  it("does not mutate its input", () => {
    const items = [stored("b", []), stored("a", [])];
    const before = items.map((i) => i.record_id);
    sortQueue(items);
    expect(items.map((i) => i.record_id)).toEqual(before);
  });
});
