/**
 * Typed client for the review service. Every panel action goes through this
 * module; the UI holds no data the server does not own.
 */

import {
  AuditEvent,
  CommitResult,
  DocumentSummary,
  Job,
  Preview,
  ReviewAction,
  ReviewItem,
  ReviewQueue,
  VischeckResult,
} from './types.js';

const API_PREFIX = '/api/v1';

interface ErrorEnvelope {
  error?: { code?: string; message?: string; detail?: unknown };
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: unknown;

  constructor(status: number, code: string, message: string, detail?: unknown) {
    super(message);
    this.name = 'ApiError';
    this.status = status;
    this.code = code;
    this.detail = detail;
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string, readonly operatorId: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { 'Content-Type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    const res = await fetch(`${this.baseUrl}${API_PREFIX}${path}`, init);
    if (!res.ok) {
      let code = 'http_error';
      let message = `request failed with status ${res.status}`;
      let detail: unknown;
      try {
        const envelope = (await res.json()) as ErrorEnvelope;
        if (envelope.error) {
          code = envelope.error.code ?? code;
          message = envelope.error.message ?? message;
          detail = envelope.error.detail;
        }
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(res.status, code, message, detail);
    }
    return (await res.json()) as T;
  }

  listDocuments(): Promise<{ documents: DocumentSummary[] }> {
    return this.request('GET', '/documents');
  }

  reviewQueue(docId: string): Promise<ReviewQueue> {
    return this.request('GET', `/documents/${encodeURIComponent(docId)}/review`);
  }

  // item ids contain slashes; the service routes them as a path suffix
  transition(itemId: string, action: ReviewAction, value?: string): Promise<{ item: ReviewItem }> {
    const body: Record<string, unknown> = { action, operator_id: this.operatorId };
    if (value !== undefined) body.value = value;
    return this.request('POST', `/review/${itemId}/transition`, body);
  }

  commitRedactions(docId: string): Promise<CommitResult> {
    return this.request('POST', `/documents/${encodeURIComponent(docId)}/commit`, {
      operator_id: this.operatorId,
    });
  }

  preview(docId: string, page = 0, redacted = false): Promise<Preview> {
    const query = `page=${page}&redacted=${redacted}`;
    return this.request('GET', `/documents/${encodeURIComponent(docId)}/preview?${query}`);
  }

  runVischeck(
    docId: string,
    rulePack: string,
    source: 'provider' | 'classical',
  ): Promise<VischeckResult> {
    return this.request('POST', `/documents/${encodeURIComponent(docId)}/vischeck`, {
      operator_id: this.operatorId,
      rule_pack: rulePack,
      source,
    });
  }

  recordAssessment(docId: string, note: string): Promise<{ recorded: boolean; seq: number }> {
    return this.request('POST', `/documents/${encodeURIComponent(docId)}/assessment`, {
      operator_id: this.operatorId,
      note,
    });
  }

  documentAudit(docId: string): Promise<{ events: AuditEvent[] }> {
    return this.request('GET', `/documents/${encodeURIComponent(docId)}/audit`);
  }

  startTask(docId: string, taskKind: string): Promise<{ job: Job }> {
    return this.request('POST', `/documents/${encodeURIComponent(docId)}/tasks`, {
      task_kind: taskKind,
      operator_id: this.operatorId,
    });
  }

  getJob(jobId: string): Promise<{ job: Job }> {
    return this.request('GET', `/jobs/${encodeURIComponent(jobId)}`);
  }
}
