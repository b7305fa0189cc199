"""
개념 기반 CNN 설명 툴킷

numpy 자동미분 CNN 엔진 위에서 CAV, 개념 맵, 레이어 Integrated Gradients 로
개념 기여도를 계산하고, 태그가 찍힌 합성 데이터셋으로 설명 결과를 검증합니다.

주요 구성 요소:
- engine: 연산자 커널과 계산 그래프
- config: 실험 설정 스키마와 로더
- models: 구조 명세, 체크포인트, 데이터셋, 설명 도메인, 리포트 모델
- services: 학습/추론, 합성 데이터, CAV, 개념 맵, 기여도, TCAV, 실험 오케스트레이션
- repositories: 체크포인트 / CAV / 데이터셋 / 리포트 파일 저장소
- utils: 글리프, 그리기, 오버레이, 통계, 차트
- exceptions: 커스텀 예외 클래스
"""

__version__ = "1.0.0"
__author__ = "Concept XAI Team"
__description__ = "Concept attribution toolkit for CNNs"
