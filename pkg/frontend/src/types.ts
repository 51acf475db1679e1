/**
 * Wire types for the extraction service's ``/v1`` API.
 *
 * The record payload is a flat object: string values for the card fields
 * plus integer ``<field>conf`` twins (0-100) and the portrait geometry.
 * Shapes here mirror the server exactly; nothing is derived client-side.
 */

export interface CardRecord {
  kind: string;
  identifier: string;
  name: string;
  birthPlace: string;
  birthDate: string;
  gender: string;
  bloodType: string;
  address: string;
  religion: string;
  marriageStatus: string;
  occupation: string;
  nationalityCode: string;
  expiryDate: string;
  facePhoto: string;
  cardImage: string;
  issuerCountryCode: string;
  issuedProvince: string;
  issuedCity: string;
  issuedDate: string;
  faceTop: number;
  faceLeft: number;
  faceWidth: number;
  faceHeight: number;
  extractedAt: string;
  identifierconf: number;
  nameconf: number;
  birthPlaceconf: number;
  birthDateconf: number;
  genderconf: number;
  bloodTypeconf: number;
  addressconf: number;
  religionconf: number;
  marriageStatusconf: number;
  occupationconf: number;
  issuedProvinceconf: number;
  issuedCityconf: number;
  issuedDateconf: number;
}

export type RecordStatus = "pending-review" | "reviewed" | "auto-accepted";

export interface CorrectionEntry {
  field: string;
  old: string;
  new: string;
  timestamp: string;
}

/** One stored extraction as returned by every record-bearing endpoint. */
export interface StoredRecord {
  record_id: string;
  record: CardRecord;
  flagged_fields: string[];
  status: RecordStatus;
  revision: number;
  corrections: CorrectionEntry[];
}

export interface FieldRule {
  pattern?: string;
  enum?: string[];
  literal?: string;
}

export type RuleSet = Record<string, FieldRule>;

/** Payload of ``GET /v1/config``: the server-side rules a client mirrors. */
export interface ServiceConfig {
  confidence_review_threshold: number;
  correctable_fields: string[];
  conf_paired_fields: string[];
  validation_rules: RuleSet;
}
